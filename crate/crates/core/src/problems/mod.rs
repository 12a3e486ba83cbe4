//! Objective oracles: analytic test problems, classification losses, and
//! the data they are built from.

mod classification;
mod libsvm;
mod registry;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::SymMatrix;

pub use classification::{
    logistic_objective, sigmoid_objective, synth_classification, ClassificationData, LabelSet, Logistic,
    Sigmoid,
};
pub use libsvm::{load_libsvm, load_libsvm_with, write_libsvm, LabelMap};
pub use registry::{get_problem, registry_entries, RegistryEntry};

/// A smooth function with analytic first and second derivatives.
pub trait Objective: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn x0(&self) -> DVector<f64>;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> SymMatrix;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    pub n_f: usize,
    pub n_g: usize,
    pub n_h: usize,
}

/// Highest derivative requested from the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EvalOrder {
    Value,
    Gradient,
    Hessian,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub f: f64,
    pub g: Option<DVector<f64>>,
    pub h: Option<SymMatrix>,
}

/// An oracle together with per-run evaluation counters.
#[derive(Clone, Debug)]
pub struct ObjectiveProblem {
    oracle: Arc<dyn Objective>,
    counters: EvalCounters,
}

impl ObjectiveProblem {
    pub fn new(oracle: Arc<dyn Objective>) -> Self {
        Self { oracle, counters: EvalCounters::default() }
    }

    pub fn name(&self) -> &str {
        self.oracle.name()
    }

    pub fn n(&self) -> usize {
        self.oracle.n()
    }

    pub fn x0(&self) -> DVector<f64> {
        self.oracle.x0()
    }

    pub fn oracle(&self) -> &Arc<dyn Objective> {
        &self.oracle
    }

    pub fn counters(&self) -> EvalCounters {
        self.counters
    }

    /// Fresh copy with zeroed counters.
    pub fn fresh(&self) -> Self {
        Self::new(Arc::clone(&self.oracle))
    }

    pub fn eval(&mut self, x: &DVector<f64>, order: EvalOrder) -> Evaluation {
        self.counters.n_f += 1;
        let f = self.oracle.value(x);
        let g = (order >= EvalOrder::Gradient).then(|| {
            self.counters.n_g += 1;
            self.oracle.gradient(x)
        });
        let h = (order >= EvalOrder::Hessian).then(|| {
            self.counters.n_h += 1;
            self.oracle.hessian(x)
        });
        Evaluation { f, g, h }
    }

    /// Gradient and Hessian at a point whose value is already known.
    pub fn derivatives(&mut self, x: &DVector<f64>) -> (DVector<f64>, SymMatrix) {
        self.counters.n_g += 1;
        self.counters.n_h += 1;
        (self.oracle.gradient(x), self.oracle.hessian(x))
    }
}

fn fd_step(xi: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + xi.abs())
}

/// Central-difference gradient.
pub fn fd_gradient(obj: &dyn Objective, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let h = fd_step(x[i]);
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += h;
        m[i] -= h;
        (obj.value(&p) - obj.value(&m)) / (2.0 * h)
    })
}

/// Central differences of the analytic gradient, symmetrized.
pub fn fd_hessian(obj: &dyn Objective, x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = fd_step(x[j]);
        let mut p = x.clone();
        let mut m = x.clone();
        p[j] += h;
        m[j] -= h;
        let col = (obj.gradient(&p) - obj.gradient(&m)) / (2.0 * h);
        out.set_column(j, &col);
    }
    (&out + out.transpose()) * 0.5
}

/// Worst relative derivative errors over a set of points.
#[derive(Clone, Copy, Debug, Default)]
pub struct DerivativeCheck {
    /// `max |g - g_fd| / (1 + |g|)`.
    pub gradient: f64,
    /// `max |H - H_fd|_max / (1 + |H|_max)`.
    pub hessian: f64,
}

impl DerivativeCheck {
    pub fn passes(&self, grad_tol: f64, hess_tol: f64) -> bool {
        self.gradient <= grad_tol && self.hessian <= hess_tol
    }
}

/// The standard starting point and `extra` uniform perturbations of it.
pub fn check_points(obj: &dyn Objective, extra: usize, radius: f64, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = obj.x0();
    let mut pts = vec![x0.clone()];
    for _ in 0..extra {
        pts.push(x0.map(|v| v + rng.random_range(-radius..radius)));
    }
    pts
}

pub fn check_derivatives(obj: &dyn Objective, points: &[DVector<f64>]) -> DerivativeCheck {
    let mut out = DerivativeCheck::default();
    for x in points {
        let g = obj.gradient(x);
        let gfd = fd_gradient(obj, x);
        out.gradient = out.gradient.max((&g - gfd).norm() / (1.0 + g.norm()));
        let h = obj.hessian(x).to_dense();
        let hfd = fd_hessian(obj, x);
        let hmax = h.amax();
        out.hessian = out.hessian.max((h - hfd).amax() / (1.0 + hmax));
    }
    out
}
