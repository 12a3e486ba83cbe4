//! Benchmark suites: run solver and problem lists, store the reports and
//! build performance profiles from them.

mod config;
mod io;
mod profile;

use std::path::{Path, PathBuf};

pub use config::{
    parse_config, Format, Loss, ProblemKind, ProblemSpec, SolverName, SolverSpec, SuiteConfig,
    CLASSIFICATION_EPS_REL, REGISTRY_EPS_REL,
};
pub use io::{read_csv, read_json, read_rows, write_csv, write_json, ReportRow, CSV_COLUMNS};
pub use profile::{performance_profile, Metric, ProfileTable};

use crate::driver::{ar2_solve, far2_solve, RunReport};
use crate::error::Result;
use crate::exec::Exec;
use crate::problems::ObjectiveProblem;
use crate::second_order::far2so_solve;

/// Runs one solver on a fresh copy of `problem`.
pub fn run_one(solver: &SolverSpec, problem: &ObjectiveProblem, spec: &ProblemSpec) -> RunReport {
    let params = config::run_params(solver, spec);
    let mut p = problem.fresh();
    let mut report = match solver.name {
        SolverName::Ar2 => ar2_solve(&mut p, &params.base),
        SolverName::Far2Pk | SolverName::Far2Rk => far2_solve(&mut p, &params.base),
        SolverName::Far2So => far2so_solve(&mut p, &params),
    };
    report.solver = solver.name.as_str().into();
    report
}

/// One report per `(solver, problem)` pair, problems outermost. All
/// problems are built before any run so configuration errors surface first.
/// Runs are spread over `parallel_runs` workers; the result order does not
/// depend on scheduling.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<RunReport>> {
    run_suite_with(cfg, Exec::available())
}

pub fn run_suite_with(cfg: &SuiteConfig, exec: Exec) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let problems = cfg.problems.iter().map(|p| p.build(cfg.seed, exec)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..problems.len()).flat_map(|p| (0..cfg.solvers.len()).map(move |s| (p, s))).collect();
    let one = |&(p, s): &(usize, usize)| {
        let mut r = run_one(&cfg.solvers[s], &problems[p], &cfg.problems[p]);
        if !cfg.timing {
            r.wall_s = 0.0;
        }
        r
    };
    let reports = if cfg.parallel_runs > 1 {
        exec.with_jobs(cfg.parallel_runs, || exec.map(&jobs, one))
    } else {
        Exec::Sequential.map(&jobs, one)
    };
    Ok(reports)
}

/// Writes `reports.csv` or `reports.json` under `dir` and returns its path.
pub fn write_reports(dir: &Path, format: Format, reports: &[RunReport]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    match format {
        Format::Csv => {
            let path = dir.join("reports.csv");
            let rows: Vec<_> = reports.iter().map(ReportRow::from_report).collect();
            write_csv(&path, &rows)?;
            Ok(path)
        }
        Format::Json => {
            let path = dir.join("reports.json");
            write_json(&path, reports)?;
            Ok(path)
        }
    }
}
