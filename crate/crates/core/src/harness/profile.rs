//! Dolan–Moré performance profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use super::io::ReportRow;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Factorizations,
    Iterations,
}

impl Metric {
    fn cost(self, r: &ReportRow) -> f64 {
        match self {
            Metric::Factorizations => r.n_fact as f64,
            Metric::Iterations => r.n_nli as f64,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fact" | "n_fact" => Ok(Metric::Factorizations),
            "nli" | "n_nli" => Ok(Metric::Iterations),
            _ => Err(Error::Profile(format!("unknown metric `{s}`"))),
        }
    }
}

/// Costs, ratios and the step functions `p_A(tau)` of each solver.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    pub solvers: Vec<String>,
    /// `(problem, n)` keys.
    pub problems: Vec<(String, usize)>,
    /// `costs[s][p]`; `None` marks a failure.
    pub costs: Vec<Vec<Option<f64>>>,
    /// `cost / best cost`, infinite for failures.
    pub ratios: Vec<Vec<f64>>,
    /// Breakpoints of all curves: 1 and every distinct finite ratio.
    pub taus: Vec<f64>,
    /// `curves[s][i] = p_s(taus[i])`.
    pub curves: Vec<Vec<f64>>,
}

impl ProfileTable {
    /// `p_A(tau)`: fraction of problems solved within `tau` times the best.
    pub fn fraction(&self, solver: usize, tau: f64) -> f64 {
        let r = &self.ratios[solver];
        if r.is_empty() {
            return 0.0;
        }
        r.iter().filter(|&&v| v <= tau).count() as f64 / r.len() as f64
    }

    pub fn solver_index(&self, name: &str) -> Option<usize> {
        self.solvers.iter().position(|s| s == name)
    }

    /// One `tau p` file per solver, named `profile_<solver>.dat`.
    pub fn write_series(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (s, name) in self.solvers.iter().enumerate() {
            let mut text = String::from("# tau p\n");
            for (tau, p) in self.taus.iter().zip(&self.curves[s]) {
                text.push_str(&format!("{tau} {p}\n"));
            }
            let path = dir.join(format!("profile_{name}.dat"));
            std::fs::write(&path, text)?;
            out.push(path);
        }
        Ok(out)
    }
}

/// Costs below one are raised to one so that zero-cost runs give finite
/// ratios. Problems a solver has no row for count as failures.
pub fn performance_profile(rows: &[ReportRow], metric: Metric) -> Result<ProfileTable> {
    let solvers: Vec<String> = rows.iter().map(|r| r.solver.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if solvers.len() < 2 {
        return Err(Error::Profile(format!("need at least two solvers, got {}", solvers.len())));
    }
    let problems: Vec<(String, usize)> =
        rows.iter().map(|r| (r.problem.clone(), r.n)).collect::<BTreeSet<_>>().into_iter().collect();
    let mut table: BTreeMap<(&str, &str, usize), Option<f64>> = BTreeMap::new();
    for r in rows {
        let cost = r.converged().then(|| metric.cost(r).max(1.0));
        if table.insert((r.solver.as_str(), r.problem.as_str(), r.n), cost).is_some() {
            return Err(Error::Profile(format!("duplicate run of {} on {} (n = {})", r.solver, r.problem, r.n)));
        }
    }
    let costs: Vec<Vec<Option<f64>>> = solvers
        .iter()
        .map(|s| problems.iter().map(|(p, n)| table.get(&(s.as_str(), p.as_str(), *n)).copied().flatten()).collect())
        .collect();
    let best: Vec<f64> = (0..problems.len())
        .map(|p| costs.iter().filter_map(|c| c[p]).fold(f64::INFINITY, f64::min))
        .collect();
    let ratios: Vec<Vec<f64>> = costs
        .iter()
        .map(|c| c.iter().zip(&best).map(|(v, b)| v.map_or(f64::INFINITY, |v| v / b)).collect())
        .collect();
    let mut taus: Vec<f64> = ratios.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    taus.push(1.0);
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut out = ProfileTable { solvers, problems, costs, ratios, taus, curves: Vec::new() };
    out.curves = (0..out.solvers.len()).map(|s| out.taus.iter().map(|&t| out.fraction(s, t)).collect()).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(solver: &str, problem: &str, fact: usize, ok: bool) -> ReportRow {
        ReportRow {
            problem: problem.into(),
            n: 2,
            solver: solver.into(),
            status: if ok { "FirstOrderPoint" } else { "IterLimit" }.into(),
            n_nli: 1,
            n_fact: fact,
            n_refresh: 0,
            ave_k: 0.0,
            n_sub: 0,
            n_sec: 0,
            f_final: 0.0,
            gnorm_final: 0.0,
            wall_s: 0.0,
        }
    }

    #[test]
    fn two_solvers_one_problem() {
        let t = performance_profile(&[row("A", "P", 1, true), row("B", "P", 2, true)], Metric::Factorizations)
            .unwrap();
        let (a, b) = (t.solver_index("A").unwrap(), t.solver_index("B").unwrap());
        assert_eq!(t.fraction(a, 1.0), 1.0);
        assert_eq!(t.fraction(b, 1.0), 0.0);
        assert_eq!(t.fraction(b, 2.0), 1.0);
        assert_eq!(t.taus, vec![1.0, 2.0]);
    }

    #[test]
    fn identical_costs_and_failures() {
        let t = performance_profile(&[row("A", "P", 3, true), row("B", "P", 3, true)], Metric::Factorizations)
            .unwrap();
        assert!(t.curves.iter().flatten().all(|&p| p == 1.0));
        let t = performance_profile(
            &[row("A", "P", 3, true), row("B", "P", 3, false), row("A", "Q", 1, true), row("B", "Q", 1, false)],
            Metric::Factorizations,
        )
        .unwrap();
        let b = t.solver_index("B").unwrap();
        assert!(t.curves[b].iter().all(|&p| p == 0.0));
        assert_eq!(t.fraction(b, 1e300), 0.0);
    }

    #[test]
    fn single_solver_is_an_error() {
        assert!(matches!(
            performance_profile(&[row("A", "P", 1, true)], Metric::Iterations),
            Err(Error::Profile(_))
        ));
    }

    #[test]
    fn zero_cost_is_floored() {
        let t = performance_profile(&[row("A", "P", 0, true), row("B", "P", 2, true)], Metric::Factorizations)
            .unwrap();
        assert_eq!(t.ratios[t.solver_index("B").unwrap()][0], 2.0);
    }
}
