use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use far2::harness::{self, Format, Metric, SuiteConfig};
use far2::problems::{
    check_derivatives, check_points, registry_entries, synth_classification, LabelSet, Logistic, Objective,
    Sigmoid,
};
use far2::{ar2_solve, far2_solve, get_problem, Exec, SolverConfig};

/// `println!` that exits quietly when stdout is closed.
macro_rules! out {
    ($($t:tt)*) => {
        if writeln!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    };
}

#[derive(Parser)]
#[command(name = "far2", version, about = "Cubic regularization solvers with frozen Krylov subspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Fact,
    Nli,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Seed of synthetic problems without their own seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Concurrent runs.
        #[arg(long)]
        jobs: Option<usize>,
        /// Record wall-clock times in the reports.
        #[arg(long)]
        timing: bool,
    },
    /// Performance profiles from stored reports.
    Profile {
        /// Report files (CSV or JSON).
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "fact")]
        metric: MetricArg,
        /// Directory for the `tau p` series; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the analytic test problems.
    List,
    /// Derivative and solver self-test.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cmd: Command) -> far2::Result<bool> {
    match cmd {
        Command::Run { config, out, format, seed, jobs, timing } => {
            let mut cfg = SuiteConfig::from_file(&config)?;
            if let Some(f) = format {
                cfg.format = match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Json => Format::Json,
                };
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(j) = jobs {
                cfg.parallel_runs = j;
            }
            cfg.timing |= timing;
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let reports = harness::run_suite(&cfg)?;
            for r in &reports {
                out!(
                    "{:<28} {:>6} {:<8} {:<16} nli={:<5} fact={:<5} f={:.6e}",
                    r.problem,
                    r.n,
                    r.solver,
                    r.status.as_str(),
                    r.counters.n_nli,
                    r.counters.n_fact,
                    r.f_final
                );
            }
            let path = harness::write_reports(&dir, cfg.format, &reports)?;
            out!("wrote {}", path.display());
            Ok(true)
        }
        Command::Profile { reports, metric, out } => {
            let mut rows = Vec::new();
            for p in &reports {
                rows.extend(harness::read_rows(p)?);
            }
            let metric = match metric {
                MetricArg::Fact => Metric::Factorizations,
                MetricArg::Nli => Metric::Iterations,
            };
            let table = harness::performance_profile(&rows, metric)?;
            match out {
                Some(dir) => {
                    for p in table.write_series(&dir)? {
                        out!("wrote {}", p.display());
                    }
                }
                None => {
                    for (s, name) in table.solvers.iter().enumerate() {
                        out!("# {name}");
                        for (tau, p) in table.taus.iter().zip(&table.curves[s]) {
                            out!("{tau} {p}");
                        }
                    }
                }
            }
            Ok(true)
        }
        Command::List => {
            for e in registry_entries() {
                out!("{:<12} {}", e.name, e.formula);
            }
            Ok(true)
        }
        Command::Check { seed } => check(seed),
    }
}

fn check(seed: u64) -> far2::Result<bool> {
    let mut ok = true;
    let mut report = |name: &str, pass: bool, detail: String| {
        out!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };
    for e in registry_entries() {
        let n = [8, 4, 2, 3].into_iter().find(|&n| (e.admits)(n).is_ok()).unwrap_or(2);
        let p = get_problem(e.name, n)?;
        let c = check_derivatives(p.oracle().as_ref(), &check_points(p.oracle().as_ref(), 5, 0.5, seed));
        report(&format!("derivatives {} (n = {n})", e.name), c.passes(1e-5, 1e-4), format!("{c:?}"));
    }
    let data = Arc::new(synth_classification(200, 6, seed)?);
    let losses: Vec<Box<dyn Objective>> = vec![
        Box::new(Logistic::new("logistic", data.clone(), Exec::available())?),
        Box::new(Sigmoid::new("sigmoid", Arc::new(data.relabel(LabelSet::ZeroOne)), Exec::available())?),
    ];
    for obj in &losses {
        let c = check_derivatives(obj.as_ref(), &check_points(obj.as_ref(), 5, 1.0, seed));
        report(&format!("derivatives {}", obj.name()), c.passes(1e-5, 1e-4), format!("{c:?}"));
    }
    let cfg = SolverConfig::default();
    for name in ["ROSENBROCK", "TRIDIA", "ENGVAL1"] {
        let n = if name == "ROSENBROCK" { 2 } else { 50 };
        let mut p = get_problem(name, n)?;
        for r in [far2_solve(&mut p.fresh(), &cfg), ar2_solve(&mut p, &cfg)] {
            let pass = r.status.converged() && r.monitor.total() == 0;
            report(
                &format!("{} on {name}", r.solver),
                pass,
                format!("{} nli={} fact={} violations={}", r.status.as_str(), r.counters.n_nli, r.counters.n_fact, r.monitor.total()),
            );
        }
    }
    Ok(ok)
}
