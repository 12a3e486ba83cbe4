//! Second-order Taylor model, its cubic regularization, and the
//! quadratic-regularized variant used by the regularized Newton step.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{SymMatrix, DENSE_LIMIT};
use crate::second_order;

/// Data defining the models at the current iterate.
#[derive(Clone, Copy, Debug)]
pub struct ModelContext<'a> {
    f0: f64,
    g: &'a DVector<f64>,
    h: &'a SymMatrix,
    sigma: f64,
}

/// Taylor and cubic model values at a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelValue {
    pub taylor: f64,
    pub cubic: f64,
}

impl<'a> ModelContext<'a> {
    pub fn new(f0: f64, g: &'a DVector<f64>, h: &'a SymMatrix, sigma: f64) -> Result<Self> {
        check_dim(h.n(), g.len())?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Contract(format!("sigma must be positive, got {sigma}")));
        }
        if !f0.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("model data must be finite".into()));
        }
        Ok(Self { f0, g, h, sigma })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn gradient_at_origin(&self) -> &'a DVector<f64> {
        self.g
    }

    pub fn hessian(&self) -> &'a SymMatrix {
        self.h
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// Model point with `H s` computed once.
    pub fn at(&self, s: &DVector<f64>) -> Result<ModelPoint<'_, 'a>> {
        check_dim(self.n(), s.len())?;
        let hs = self.h.matvec(s);
        Ok(ModelPoint { ctx: self, s: s.clone(), hs })
    }

    /// Model point from a step whose product `H s` is already known.
    pub fn at_with_product(&self, s: DVector<f64>, hs: DVector<f64>) -> Result<ModelPoint<'_, 'a>> {
        check_dim(self.n(), s.len())?;
        check_dim(self.n(), hs.len())?;
        Ok(ModelPoint { ctx: self, s, hs })
    }

    pub fn evaluate(&self, s: &DVector<f64>) -> Result<ModelValue> {
        let p = self.at(s)?;
        Ok(ModelValue { taylor: p.taylor(), cubic: p.cubic() })
    }

    pub fn gradient(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.at(s)?.gradient())
    }

    pub fn quad_reg_value(&self, s: &DVector<f64>, lambda_hat: f64) -> Result<f64> {
        self.at(s)?.quad_reg(lambda_hat)
    }

    /// Smallest eigenvalue of the cubic model Hessian
    /// `H + sigma |s| I + (sigma / |s|) s s^T` (just `H` at `s = 0`).
    pub fn curvature_min(&self, s: &DVector<f64>) -> Result<f64> {
        check_dim(self.n(), s.len())?;
        let sn = s.norm();
        if sn == 0.0 {
            return Ok(second_order::min_eig(self.h, false)?.0);
        }
        let shift = self.sigma * sn;
        let rank1 = self.sigma / sn;
        let n = self.n();
        if n <= DENSE_LIMIT {
            let mut m: DMatrix<f64> = self.h.to_dense();
            for i in 0..n {
                m[(i, i)] += shift;
            }
            m.ger(rank1, s, s, 1.0);
            Ok(second_order::min_eig_dense(m, false)?.0)
        } else {
            let h = self.h;
            let op = |v: &DVector<f64>| {
                let mut out = h.matvec(v);
                out.axpy(shift, v, 1.0);
                out.axpy(rank1 * s.dot(v), s, 1.0);
                out
            };
            let scale = h.max_abs() * (n as f64).sqrt() + shift + rank1 * sn * sn;
            Ok(second_order::lanczos_min(n, op, scale, false)?.0)
        }
    }
}

/// The models evaluated at one step, sharing a cached `H s`.
#[derive(Clone, Debug)]
pub struct ModelPoint<'c, 'a> {
    ctx: &'c ModelContext<'a>,
    s: DVector<f64>,
    hs: DVector<f64>,
}

impl ModelPoint<'_, '_> {
    pub fn step(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn hs(&self) -> &DVector<f64> {
        &self.hs
    }

    pub fn into_step(self) -> DVector<f64> {
        self.s
    }

    pub fn norm(&self) -> f64 {
        self.s.norm()
    }

    /// `T(0) - T(s) = -(g^T s + s^T H s / 2)`.
    pub fn taylor_decrease(&self) -> f64 {
        -(self.ctx.g.dot(&self.s) + 0.5 * self.s.dot(&self.hs))
    }

    pub fn taylor(&self) -> f64 {
        self.ctx.f0 - self.taylor_decrease()
    }

    pub fn cubic(&self) -> f64 {
        let sn = self.norm();
        self.taylor() + self.ctx.sigma / 3.0 * sn * sn * sn
    }

    pub fn gradient(&self) -> DVector<f64> {
        let sn = self.norm();
        let mut out = self.ctx.g + &self.hs;
        out.axpy(self.ctx.sigma * sn, &self.s, 1.0);
        out
    }

    /// Whether `|grad m(s)| <= theta1 |s|^2 / 2`.
    pub fn is_stationary_enough(&self, theta1: f64) -> bool {
        let sn = self.norm();
        self.gradient().norm() <= 0.5 * theta1 * sn * sn
    }

    pub fn quad_reg(&self, lambda_hat: f64) -> Result<f64> {
        if !(lambda_hat >= 0.0) {
            return Err(Error::Contract(format!("lambda_hat must be nonnegative, got {lambda_hat}")));
        }
        let sn = self.norm();
        Ok(self.taylor() + 0.5 * lambda_hat * sn * sn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e1(n: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[0] = 1.0;
        v
    }

    #[test]
    fn values_at_simple_points() {
        let g = e1(1);
        let h = SymMatrix::identity(1);
        let ctx = ModelContext::new(0.0, &g, &h, 1.0).unwrap();
        assert_eq!(ctx.evaluate(&DVector::zeros(1)).unwrap(), ModelValue { taylor: 0.0, cubic: 0.0 });
        let lam = (5f64.sqrt() - 1.0) / 2.0;
        let v = ctx.evaluate(&(-lam * &g)).unwrap();
        let t = -lam + 0.5 * lam * lam;
        assert_relative_eq!(v.taylor, t, epsilon = 1e-12);
        assert_relative_eq!(v.cubic, t + lam.powi(3) / 3.0, epsilon = 1e-12);
        assert!((v.taylor + 0.4271).abs() < 1e-4 && (v.cubic + 0.3484).abs() < 1e-4);
        assert!(ctx.gradient(&(-lam * &g)).unwrap().norm() < 1e-15);

        let g0 = DVector::zeros(3);
        let h0 = SymMatrix::zeros(3);
        let ctx = ModelContext::new(5.0, &g0, &h0, 3.0).unwrap();
        let s = DVector::from_vec(vec![0.6, 0.0, 0.8]);
        let v = ctx.evaluate(&s).unwrap();
        assert_relative_eq!(v.taylor, 5.0);
        assert_relative_eq!(v.cubic, 6.0, epsilon = 1e-14);
    }

    #[test]
    fn contract_errors() {
        let g = e1(2);
        let h = SymMatrix::identity(2);
        assert!(ModelContext::new(0.0, &g, &h, 0.0).is_err());
        let ctx = ModelContext::new(0.0, &g, &h, 1.0).unwrap();
        assert!(matches!(ctx.evaluate(&DVector::zeros(3)), Err(Error::Dimension { .. })));
        assert!(ctx.quad_reg_value(&DVector::zeros(2), -1.0).is_err());
        let bad = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(ModelContext::new(0.0, &bad, &h, 1.0).is_err());
    }

    #[test]
    fn quad_reg_examples() {
        let g = DVector::from_vec(vec![3.0, 5.0]);
        let h = SymMatrix::from_diagonal(&[2.0, 4.0]);
        let ctx = ModelContext::new(0.0, &g, &h, 1.0).unwrap();
        let s = DVector::from_vec(vec![-1.0, -1.0]);
        assert_relative_eq!(ctx.quad_reg_value(&s, 1.0).unwrap(), -4.0);
        assert_eq!(ctx.quad_reg_value(&DVector::zeros(2), 7.0).unwrap(), 0.0);
        // s solves (H + I) s = -g, so the decrease is half of s^T g
        assert_relative_eq!(ctx.quad_reg_value(&s, 1.0).unwrap() - 0.0, 0.5 * s.dot(&g));
    }

    #[test]
    fn curvature_examples() {
        let g = DVector::zeros(2);
        let h = SymMatrix::from_diagonal(&[2.0, 5.0]);
        let ctx = ModelContext::new(0.0, &g, &h, 4.0).unwrap();
        assert_relative_eq!(ctx.curvature_min(&DVector::zeros(2)).unwrap(), 2.0, epsilon = 1e-12);

        let h = SymMatrix::from_diagonal(&[-1.0, 1.0]);
        let ctx = ModelContext::new(0.0, &g, &h, 1.0).unwrap();
        let s = DVector::from_vec(vec![1.0, 0.0]);
        assert_relative_eq!(ctx.curvature_min(&s).unwrap(), 1.0, epsilon = 1e-12);

        let g3 = DVector::zeros(3);
        let h0 = SymMatrix::zeros(3);
        let ctx = ModelContext::new(0.0, &g3, &h0, 2.0).unwrap();
        assert_relative_eq!(ctx.curvature_min(&e1(3)).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 6;
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let h = SymMatrix::from_dense(m);
            let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let ctx = ModelContext::new(0.3, &g, &h, rng.random_range(0.1..3.0)).unwrap();
            let s = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let grad = ctx.gradient(&s).unwrap();
            let step = 1e-5;
            let fd = DVector::from_fn(n, |i, _| {
                let mut p = s.clone();
                let mut q = s.clone();
                p[i] += step;
                q[i] -= step;
                (ctx.evaluate(&p).unwrap().cubic - ctx.evaluate(&q).unwrap().cubic) / (2.0 * step)
            });
            assert!((&grad - fd).norm() <= 1e-6 * (1.0 + grad.norm()));
        }
    }
}
