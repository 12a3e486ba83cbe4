//! Suite configuration: a flat `key = value` text format with one
//! `[solver]` or `[problem]` section per entry.
//!
//! ```text
//! # keys before the first section (or under [suite]) apply to the suite
//! format = csv
//! parallel_runs = 2
//! max_iters = 1000        # solver parameters here are defaults for all solvers
//!
//! [solver]
//! name = FAR2-PK
//! j_max = 30
//!
//! [problem]
//! kind = registry
//! name = ROSENBR
//! n = 100
//!
//! [problem]
//! kind = logistic
//! samples = 1000
//! features = 50
//! seed = 3
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::driver::SolverConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::krylov::SpaceKind;
use crate::problems::{
    get_problem, load_libsvm_with, synth_classification, LabelMap, Logistic, ObjectiveProblem, Sigmoid,
};
use crate::second_order::SecondOrderConfig;

/// Default relative gradient tolerance of the analytic test problems.
pub const REGISTRY_EPS_REL: f64 = 1e-6;
/// Default relative gradient tolerance of the classification problems.
pub const CLASSIFICATION_EPS_REL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverName {
    Ar2,
    Far2Pk,
    Far2Rk,
    Far2So,
}

impl SolverName {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverName::Ar2 => "AR2",
            SolverName::Far2Pk => "FAR2-PK",
            SolverName::Far2Rk => "FAR2-RK",
            SolverName::Far2So => "FAR2-SO",
        }
    }
}

impl FromStr for SolverName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AR2" => Ok(SolverName::Ar2),
            "FAR2-PK" | "FAR2" => Ok(SolverName::Far2Pk),
            "FAR2-RK" => Ok(SolverName::Far2Rk),
            "FAR2-SO" => Ok(SolverName::Far2So),
            _ => Err(Error::UnknownSolver(s.into())),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSpec {
    pub name: SolverName,
    pub params: SecondOrderConfig,
}

impl SolverSpec {
    pub fn new(name: SolverName) -> Self {
        let mut params = SecondOrderConfig::default();
        if name == SolverName::Far2Rk {
            params.base.space_kind = SpaceKind::Rational;
        }
        Self { name, params }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    Logistic,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    Registry { name: String, n: usize },
    Synthetic { loss: Loss, samples: usize, features: usize, seed: Option<u64> },
    Libsvm { loss: Loss, path: PathBuf, features: Option<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub eps_rel: Option<f64>,
}

impl ProblemSpec {
    pub fn registry(name: &str, n: usize) -> Self {
        Self { kind: ProblemKind::Registry { name: name.into(), n }, eps_rel: None }
    }

    pub fn synthetic(loss: Loss, samples: usize, features: usize, seed: u64) -> Self {
        Self { kind: ProblemKind::Synthetic { loss, samples, features, seed: Some(seed) }, eps_rel: None }
    }

    pub fn eps_rel(&self) -> f64 {
        self.eps_rel.unwrap_or(match self.kind {
            ProblemKind::Registry { .. } => REGISTRY_EPS_REL,
            _ => CLASSIFICATION_EPS_REL,
        })
    }

    /// Builds the oracle; `suite_seed` is used by synthetic data without its own seed.
    pub fn build(&self, suite_seed: u64, exec: Exec) -> Result<ObjectiveProblem> {
        match &self.kind {
            ProblemKind::Registry { name, n } => get_problem(name, *n),
            ProblemKind::Synthetic { loss, samples, features, seed } => {
                let seed = seed.unwrap_or(suite_seed);
                let data = synth_classification(*samples, *features, seed)?;
                let tag = format!("{samples}x{features}-s{seed}");
                classification(*loss, data, &tag, exec)
            }
            ProblemKind::Libsvm { loss, path, features } => {
                let map = match loss {
                    Loss::Logistic => LabelMap::PlusMinusOne,
                    Loss::Sigmoid => LabelMap::ZeroOne,
                };
                let data = load_libsvm_with(path, map, *features)?;
                let stem = path.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
                classification(*loss, data, &stem, exec)
            }
        }
    }
}

fn classification(
    loss: Loss,
    data: crate::problems::ClassificationData,
    tag: &str,
    exec: Exec,
) -> Result<ObjectiveProblem> {
    let data = Arc::new(data);
    Ok(match loss {
        Loss::Logistic => ObjectiveProblem::new(Arc::new(Logistic::new(format!("LOGISTIC-{tag}"), data, exec)?)),
        Loss::Sigmoid => {
            let data = Arc::new(data.relabel(crate::problems::LabelSet::ZeroOne));
            ObjectiveProblem::new(Arc::new(Sigmoid::new(format!("SIGMOID-{tag}"), data, exec)?))
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub solvers: Vec<SolverSpec>,
    pub problems: Vec<ProblemSpec>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub parallel_runs: usize,
    pub seed: u64,
    /// Record wall-clock seconds; off by default so reports are reproducible.
    pub timing: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            solvers: Vec::new(),
            problems: Vec::new(),
            output: None,
            format: Format::Csv,
            parallel_runs: 1,
            seed: 1,
            timing: false,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(Error::Config("no solver listed".into()));
        }
        if self.problems.is_empty() {
            return Err(Error::Config("no problem listed".into()));
        }
        if self.parallel_runs == 0 {
            return Err(Error::Config("parallel_runs must be at least 1".into()));
        }
        for s in &self.solvers {
            s.params.validate()?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse_config(&text, path)
    }
}

/// Applies a solver parameter; returns `false` when the key is not one.
fn set_param(p: &mut SecondOrderConfig, key: &str, value: &str) -> Result<bool> {
    let num = || -> Result<f64> {
        value.parse::<f64>().map_err(|_| Error::Config(format!("`{key}` expects a number, got `{value}`")))
    };
    let int = || -> Result<usize> {
        value.parse::<usize>().map_err(|_| Error::Config(format!("`{key}` expects an integer, got `{value}`")))
    };
    let b = &mut p.base;
    match key {
        "eta1" => b.eta1 = num()?,
        "eta2" => b.eta2 = num()?,
        "gamma1" => b.gamma1 = num()?,
        "gamma2" => b.gamma2 = num()?,
        "theta1" => b.theta1 = num()?,
        "sigma0" => b.sigma0 = num()?,
        "sigma_min" => b.sigma_min = num()?,
        "c_low" => b.c_low = num()?,
        "c_up" => b.c_up = num()?,
        "j_max" => b.j_max = int()?,
        "max_iters" => b.max_iters = int()?,
        "time_limit" => b.time_limit = num()?,
        "space" | "space_kind" => {
            b.space_kind = match value.to_ascii_lowercase().as_str() {
                "polynomial" | "pk" => SpaceKind::Polynomial,
                "rational" | "rk" => SpaceKind::Rational,
                _ => return Err(Error::Config(format!("unknown space `{value}`"))),
            }
        }
        "theta2" => p.theta2 = num()?,
        "eps_h" => p.eps_h = num()?,
        _ => return Ok(false),
    }
    Ok(true)
}

enum Section {
    Suite,
    Solver(Vec<(String, String, usize)>),
    Problem(Vec<(String, String, usize)>),
}

pub fn parse_config(text: &str, path: &Path) -> Result<SuiteConfig> {
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut cfg = SuiteConfig::default();
    let mut defaults = SecondOrderConfig::default();
    let mut sections: Vec<Section> = Vec::new();
    let mut current = Section::Suite;
    let mut suite_keys: Vec<(String, String, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let next = match name.trim() {
                "suite" => Section::Suite,
                "solver" => Section::Solver(Vec::new()),
                "problem" => Section::Problem(Vec::new()),
                other => return Err(err(i + 1, format!("unknown section [{other}]"))),
            };
            sections.push(std::mem::replace(&mut current, next));
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(i + 1, format!("expected key = value, got `{line}`")))?;
        let entry = (k.trim().to_ascii_lowercase(), v.trim().to_string(), i + 1);
        match &mut current {
            Section::Suite => suite_keys.push(entry),
            Section::Solver(keys) | Section::Problem(keys) => keys.push(entry),
        }
    }
    sections.push(current);

    for (k, v, line) in &suite_keys {
        let wrap = |e: Error| err(*line, e.to_string());
        match k.as_str() {
            "output" => cfg.output = Some(PathBuf::from(v)),
            "format" => cfg.format = v.parse().map_err(wrap)?,
            "parallel_runs" | "jobs" => {
                cfg.parallel_runs = v.parse().map_err(|_| err(*line, format!("bad count `{v}`")))?
            }
            "seed" => cfg.seed = v.parse().map_err(|_| err(*line, format!("bad seed `{v}`")))?,
            "timing" => cfg.timing = v.parse().map_err(|_| err(*line, format!("bad flag `{v}`")))?,
            _ => {
                if !set_param(&mut defaults, k, v).map_err(wrap)? {
                    return Err(err(*line, format!("unknown suite key `{k}`")));
                }
            }
        }
    }

    for section in sections {
        match section {
            Section::Suite => {}
            Section::Solver(keys) => cfg.solvers.push(parse_solver(&keys, &defaults, &err)?),
            Section::Problem(keys) => cfg.problems.push(parse_problem(&keys, &err)?),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

type Entry = (String, String, usize);

fn parse_solver(keys: &[Entry], defaults: &SecondOrderConfig, err: &dyn Fn(usize, String) -> Error) -> Result<SolverSpec> {
    let (_, name, line) =
        keys.iter().find(|(k, _, _)| k == "name").ok_or_else(|| err(keys.first().map_or(0, |e| e.2), "solver without name".into()))?;
    let name: SolverName = name.parse().map_err(|e: Error| err(*line, e.to_string()))?;
    let mut spec = SolverSpec::new(name);
    let kind = spec.params.base.space_kind;
    spec.params = defaults.clone();
    spec.params.base.space_kind = kind;
    for (k, v, line) in keys.iter().filter(|(k, _, _)| k != "name") {
        if !set_param(&mut spec.params, k, v).map_err(|e| err(*line, e.to_string()))? {
            return Err(err(*line, format!("unknown solver key `{k}`")));
        }
    }
    Ok(spec)
}

fn parse_problem(keys: &[Entry], err: &dyn Fn(usize, String) -> Error) -> Result<ProblemSpec> {
    let get = |key: &str| keys.iter().find(|(k, _, _)| k == key);
    let first = keys.first().map_or(0, |e| e.2);
    let need = |key: &str| get(key).ok_or_else(|| err(first, format!("problem needs `{key}`")));
    let count = |key: &str| -> Result<usize> {
        let (_, v, line) = need(key)?;
        v.parse().map_err(|_| err(*line, format!("`{key}` expects a count, got `{v}`")))
    };
    let kind_name = get("kind").map_or("registry", |e| e.1.as_str()).to_ascii_lowercase();
    let allowed: &[&str] = match kind_name.as_str() {
        "registry" => &["kind", "name", "n", "eps_rel"],
        "logistic" | "sigmoid" => &["kind", "samples", "features", "seed", "eps_rel"],
        "libsvm" => &["kind", "path", "loss", "features", "eps_rel"],
        other => return Err(err(first, format!("unknown problem kind `{other}`"))),
    };
    if let Some((k, _, line)) = keys.iter().find(|(k, _, _)| !allowed.contains(&k.as_str())) {
        return Err(err(*line, format!("unknown key `{k}` for a {kind_name} problem")));
    }
    let loss_of = |s: &str, line: usize| match s.to_ascii_lowercase().as_str() {
        "logistic" => Ok(Loss::Logistic),
        "sigmoid" => Ok(Loss::Sigmoid),
        other => Err(err(line, format!("unknown loss `{other}`"))),
    };
    let kind = match kind_name.as_str() {
        "registry" => ProblemKind::Registry { name: need("name")?.1.clone(), n: count("n")? },
        "libsvm" => {
            let (_, loss, line) = need("loss")?;
            ProblemKind::Libsvm {
                loss: loss_of(loss, *line)?,
                path: PathBuf::from(&need("path")?.1),
                features: get("features").map(|_| count("features")).transpose()?,
            }
        }
        other => ProblemKind::Synthetic {
            loss: loss_of(other, first)?,
            samples: count("samples")?,
            features: count("features")?,
            seed: match get("seed") {
                Some((_, v, line)) => Some(v.parse().map_err(|_| err(*line, format!("bad seed `{v}`")))?),
                None => None,
            },
        },
    };
    let eps_rel = match get("eps_rel") {
        Some((_, v, line)) => Some(v.parse().map_err(|_| err(*line, format!("bad tolerance `{v}`")))?),
        None => None,
    };
    Ok(ProblemSpec { kind, eps_rel })
}

/// Solver parameters of one run: the solver's own with the problem's tolerance.
pub(crate) fn run_params(solver: &SolverSpec, problem: &ProblemSpec) -> SecondOrderConfig {
    let mut p = solver.params.clone();
    p.base = SolverConfig { eps_rel: problem.eps_rel(), ..p.base };
    p
}
