//! Second-order variant of the frozen-subspace solver and the smallest
//! eigenvalue utility it relies on.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::driver::{self, RunReport, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::problems::ObjectiveProblem;

/// Relative accuracy requested from the eigensolvers.
pub const EIG_RTOL: f64 = 1e-8;

/// Solver parameters plus the curvature constants of the second-order variant.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderConfig {
    pub base: SolverConfig,
    pub theta2: f64,
    pub eps_h: f64,
}

impl Default for SecondOrderConfig {
    fn default() -> Self {
        Self { base: SolverConfig::default(), theta2: 0.1, eps_h: 1e-4 }
    }
}

impl SecondOrderConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.theta2 > 0.0) {
            return Err(Error::Config(format!("theta2 must be positive, got {}", self.theta2)));
        }
        if !(self.eps_h > 0.0 && self.eps_h < 1.0) {
            return Err(Error::Config(format!("eps_H must lie in (0, 1), got {}", self.eps_h)));
        }
        Ok(())
    }
}

/// FAR2 with second-order termination and curvature safeguards.
pub fn far2so_solve(problem: &mut ObjectiveProblem, cfg: &SecondOrderConfig) -> RunReport {
    driver::run_far2so(problem, cfg)
}

/// Smallest eigenvalue of `h` and, on request, a unit eigenvector.
pub fn min_eig(h: &SymMatrix, want_vector: bool) -> Result<(f64, Option<DVector<f64>>)> {
    match h {
        SymMatrix::Dense(m) => min_eig_dense(m.clone(), want_vector),
        SymMatrix::Sparse(_) => {
            let scale = h.max_abs() * (h.n() as f64).sqrt();
            lanczos_min(h.n(), |v| h.matvec(v), scale, want_vector)
        }
    }
}

pub(crate) fn min_eig_dense(m: DMatrix<f64>, want_vector: bool) -> Result<(f64, Option<DVector<f64>>)> {
    let n = m.nrows();
    if n == 0 {
        return Err(Error::Contract("empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigFailure("non-finite matrix entries".into()));
    }
    if !want_vector {
        let vals = m.symmetric_eigenvalues();
        return Ok((vals.min(), None));
    }
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigFailure("symmetric QR did not converge".into()))?;
    let (idx, lam) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let v = normalize_sign(eig.eigenvectors.column(idx).into_owned());
    Ok((lam, Some(v)))
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub(crate) fn normalize_sign(mut v: DVector<f64>) -> DVector<f64> {
    let (mut best, mut val) = (0.0, 0.0);
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            val = x;
        }
    }
    if val < 0.0 {
        v.neg_mut();
    }
    v
}

/// Lanczos with full reorthogonalization and restarts from the best Ritz vector.
pub(crate) fn lanczos_min<F>(
    n: usize,
    apply: F,
    scale: f64,
    want_vector: bool,
) -> Result<(f64, Option<DVector<f64>>)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    const MAX_RESTARTS: usize = 30;
    let m = n.min(300);
    let tol = EIG_RTOL * scale.max(f64::MIN_POSITIVE);
    let mut start = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.731).sin());
    start /= start.norm();
    let mut best = (f64::INFINITY, start.clone());
    for _ in 0..MAX_RESTARTS {
        let mut q: Vec<DVector<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut converged = false;
        for j in 0..m {
            let mut w = apply(&q[j]);
            alpha.push(q[j].dot(&w));
            crate::linalg::orthogonalize(&q, &mut w);
            let b = w.norm();
            let breakdown = b <= 1e-14 * scale.max(1e-300);
            let last = j + 1 == m;
            if breakdown || last || (j + 1) % 10 == 0 {
                let k = alpha.len();
                let t = DMatrix::from_fn(k, k, |r, c| {
                    if r == c {
                        alpha[r]
                    } else if r == c + 1 {
                        beta[c]
                    } else if c == r + 1 {
                        beta[r]
                    } else {
                        0.0
                    }
                });
                let eig = SymmetricEigen::new(t);
                let (idx, theta) = eig
                    .eigenvalues
                    .iter()
                    .copied()
                    .enumerate()
                    .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
                let y = eig.eigenvectors.column(idx);
                let resid = b * y[k - 1].abs();
                let mut ritz = DVector::zeros(n);
                for (qi, yi) in q.iter().zip(y.iter()) {
                    ritz.axpy(*yi, qi, 1.0);
                }
                best = (theta, ritz);
                if resid <= tol || breakdown {
                    converged = true;
                    break;
                }
            }
            q.push(w / b);
            beta.push(b);
        }
        if converged {
            let v = best.1.normalize();
            return Ok((best.0, want_vector.then(|| normalize_sign(v))));
        }
        start = best.1.normalize();
    }
    Err(Error::EigFailure(format!("Lanczos did not reach tolerance {tol:e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::HessianBuilder;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_examples() {
        let (l, v) = min_eig(&SymMatrix::from_diagonal(&[3.0, -2.0, 5.0]), true).unwrap();
        assert_relative_eq!(l, -2.0, epsilon = 1e-14);
        assert_relative_eq!(v.unwrap(), DVector::from_vec(vec![0.0, 1.0, 0.0]), epsilon = 1e-14);
        for n in [1, 4, 9] {
            assert_relative_eq!(min_eig(&SymMatrix::identity(n), false).unwrap().0, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn random_dense_matches_full_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let m = DMatrix::from_fn(20, 20, |_, _| rng.random_range(-1.0..1.0));
        let h = SymMatrix::from_dense(m);
        let all = h.to_dense().symmetric_eigenvalues();
        let (l, v) = min_eig(&h, true).unwrap();
        assert!((l - all.min()).abs() <= 1e-8 * h.max_abs());
        let v = v.unwrap();
        assert!((h.matvec(&v) - l * &v).norm() < 1e-8);
    }

    #[test]
    fn lanczos_on_sparse_tridiagonal() {
        let n = 2500;
        let mut b = HessianBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0 + if i == 17 { -3.0 } else { 0.0 });
            if i + 1 < n {
                b.add(i + 1, i, -1.0);
            }
        }
        let h = b.finish();
        assert!(h.is_sparse());
        let (l, v) = min_eig(&h, true).unwrap();
        let v = v.unwrap();
        assert!((h.matvec(&v) - l * &v).norm() <= 1e-6);
        assert!(l < -1.0);
    }
}
