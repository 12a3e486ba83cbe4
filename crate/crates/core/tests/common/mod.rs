#![allow(dead_code)]

use std::sync::Arc;

use far2::problems::Objective;
use far2::{ObjectiveProblem, SymMatrix};
use nalgebra::DVector;

/// `sum_i d_i x_i^2 / 2 + q_i x_i^4 / 4`.
#[derive(Debug, Clone)]
pub struct Separable {
    pub name: String,
    pub d: Vec<f64>,
    pub q: Vec<f64>,
    pub x0: Vec<f64>,
}

impl Objective for Separable {
    fn name(&self) -> &str {
        &self.name
    }

    fn n(&self) -> usize {
        self.d.len()
    }

    fn x0(&self) -> DVector<f64> {
        DVector::from_vec(self.x0.clone())
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (0..self.n()).map(|i| 0.5 * self.d[i] * x[i] * x[i] + 0.25 * self.q[i] * x[i].powi(4)).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.d[i] * x[i] + self.q[i] * x[i].powi(3))
    }

    fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
        let diag: Vec<f64> = (0..self.n()).map(|i| self.d[i] + 3.0 * self.q[i] * x[i] * x[i]).collect();
        SymMatrix::from_diagonal(&diag)
    }
}

pub fn separable(name: &str, d: &[f64], q: &[f64], x0: &[f64]) -> ObjectiveProblem {
    ObjectiveProblem::new(Arc::new(Separable { name: name.into(), d: d.to_vec(), q: q.to_vec(), x0: x0.to_vec() }))
}

/// `x^T diag(1..5) x / 2` from ones.
pub fn convex_quadratic() -> ObjectiveProblem {
    separable("DIAG5", &[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], &[1.0; 5])
}

/// Saddle at the origin: `x^T diag(-1, 1, ..., 1) x / 2 + x_1^4 / 4`.
pub fn quartic_saddle(n: usize) -> ObjectiveProblem {
    let mut d = vec![1.0; n];
    d[0] = -1.0;
    let mut q = vec![0.0; n];
    q[0] = 1.0;
    separable("SADDLE", &d, &q, &vec![0.0; n])
}
