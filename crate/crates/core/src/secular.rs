//! Secular equations of the cubic and trust-region subproblems.
//!
//! For `lambda > max(0, -lambda_min(H))` the minimizer of the cubic model is
//! `s(lambda) = -(H + lambda I)^{-1} g`, with `lambda` the root of
//! `|s(lambda)| = lambda / sigma`. Both solvers below work with the
//! equivalent increasing concave function `1/|s(lambda)| - sigma/lambda`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{ShiftedFactor, SymMatrix, DENSE_LIMIT};
use crate::model::ModelContext;
use crate::second_order;

const MAX_ITERS: usize = 200;

/// Counts full-space shifted factorizations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FactorizationCounter {
    count: usize,
}

impl FactorizationCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn bump(&mut self) {
        self.count += 1;
    }
}

/// Factorizes `H + lambda I`, counting the attempt even when it fails.
pub fn factorize_shifted(
    h: &SymMatrix,
    lambda: f64,
    counter: &mut FactorizationCounter,
) -> Result<ShiftedFactor> {
    if !lambda.is_finite() {
        return Err(Error::Contract(format!("shift must be finite, got {lambda}")));
    }
    counter.bump();
    h.factorize_shifted(lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SecularCase {
    Easy,
    Hard,
}

#[derive(Clone, Debug)]
pub struct SecularSolution {
    pub lambda: f64,
    pub step: DVector<f64>,
    /// `| |step| - lambda / sigma |`.
    pub residual: f64,
    pub case: SecularCase,
    /// Weight of the leftmost eigenvector in the hard case.
    pub alpha: Option<f64>,
    pub n_factorizations: usize,
}

fn shifted_norm(
    lambda: f64,
    g: &DVector<f64>,
    h: &SymMatrix,
    counter: &mut FactorizationCounter,
) -> Result<f64> {
    check_dim(h.n(), g.len())?;
    let f = factorize_shifted(h, lambda, counter)?;
    Ok(f.solve(g).norm())
}

/// `|(H + lambda I)^{-1} g| - lambda / sigma`.
pub fn phi_r(
    lambda: f64,
    g: &DVector<f64>,
    h: &SymMatrix,
    sigma: f64,
    counter: &mut FactorizationCounter,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Contract(format!("sigma must be positive, got {sigma}")));
    }
    Ok(shifted_norm(lambda, g, h, counter)? - lambda / sigma)
}

/// `|(H + lambda I)^{-1} g| - delta`.
pub fn phi_t(
    lambda: f64,
    g: &DVector<f64>,
    h: &SymMatrix,
    delta: f64,
    counter: &mut FactorizationCounter,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Contract(format!("radius must be positive, got {delta}")));
    }
    Ok(shifted_norm(lambda, g, h, counter)? - delta)
}

/// Spectral form of a small reduced problem.
struct Spectral {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    beta: DVector<f64>,
}

impl Spectral {
    fn step_norm2(&self, lambda: f64, skip: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(self.beta.iter())
            .zip(skip)
            .filter(|(_, &sk)| !sk)
            .map(|((&mu, &b), _)| {
                let d = mu + lambda;
                b * b / (d * d)
            })
            .sum()
    }

    fn step(&self, lambda: f64, skip: &[bool]) -> DVector<f64> {
        let mut s = DVector::zeros(self.values.len());
        for (i, _) in skip.iter().enumerate().filter(|(_, &k)| !k) {
            let c = -self.beta[i] / (self.values[i] + lambda);
            s.axpy(c, &self.vectors.column(i), 1.0);
        }
        s
    }
}

/// Solves the cubic secular equation of a small dense problem exactly,
/// including the hard case.
pub fn solve_secular_reduced(
    g_r: &DVector<f64>,
    h_r: &DMatrix<f64>,
    sigma: f64,
    theta_eig: f64,
) -> Result<SecularSolution> {
    let m = g_r.len();
    check_dim(m, h_r.nrows())?;
    check_dim(m, h_r.ncols())?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Contract(format!("sigma must be positive, got {sigma}")));
    }
    if g_r.iter().chain(h_r.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Contract("reduced problem has non-finite entries".into()));
    }
    if m == 0 {
        return Err(Error::Contract("empty reduced problem".into()));
    }
    let sym = (h_r + h_r.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::ReducedSolve("eigendecomposition failed".into()))?;
    let beta = eig.eigenvectors.transpose() * g_r;
    let sp = Spectral { values: eig.eigenvalues, vectors: eig.eigenvectors, beta };
    let lam1 = sp.values.min();
    let hnorm = sp.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let gnorm = g_r.norm();
    let none = vec![false; m];

    if gnorm == 0.0 && lam1 >= 0.0 {
        return Ok(SecularSolution {
            lambda: 0.0,
            step: DVector::zeros(m),
            residual: 0.0,
            case: SecularCase::Easy,
            alpha: None,
            n_factorizations: 0,
        });
    }

    // hard case: negative curvature and no gradient weight on the leftmost eigenspace
    if lam1 < 0.0 {
        let cluster_tol = 1e-10 * hnorm.max(1.0);
        let cluster: Vec<bool> = sp.values.iter().map(|&mu| mu - lam1 <= cluster_tol).collect();
        let weight = cluster
            .iter()
            .zip(sp.beta.iter())
            .filter(|(c, _)| **c)
            .map(|(_, b)| b * b)
            .sum::<f64>()
            .sqrt();
        let lam_s = -lam1;
        if weight <= theta_eig * gnorm {
            let p2 = sp.step_norm2(lam_s, &cluster);
            let target = lam_s / sigma;
            if p2.sqrt() <= target {
                let alpha = (target * target - p2).max(0.0).sqrt();
                let idx = (0..m).find(|&i| cluster[i]).unwrap_or(0);
                let v1 = second_order::normalize_sign(sp.vectors.column(idx).into_owned());
                let mut step = sp.step(lam_s, &cluster);
                step.axpy(alpha, &v1, 1.0);
                let residual = (step.norm() - target).abs();
                return Ok(SecularSolution {
                    lambda: lam_s,
                    step,
                    residual,
                    case: SecularCase::Hard,
                    alpha: Some(alpha),
                    n_factorizations: 0,
                });
            }
        }
    }

    let psi = |lam: f64| -> (f64, f64) {
        // value and derivative of 1/|s| - sigma/lam
        let mut n2 = 0.0;
        let mut n3 = 0.0;
        for (&mu, &b) in sp.values.iter().zip(sp.beta.iter()) {
            let d = mu + lam;
            n2 += b * b / (d * d);
            n3 += b * b / (d * d * d);
        }
        let sn = n2.sqrt();
        (1.0 / sn - sigma / lam, n3 / (sn * sn * sn) + sigma / (lam * lam))
    };

    let mut lo = (-lam1).max(0.0);
    let mut hi = lo + 1000.0;
    let mut expand = 0;
    while psi(hi).0 <= 0.0 {
        hi = lo + 2.0 * (hi - lo);
        expand += 1;
        if expand > MAX_ITERS {
            return Err(Error::ReducedSolve("could not bracket the secular root".into()));
        }
    }
    let mut lam = hi;
    let tol = 1e-13;
    for _ in 0..MAX_ITERS {
        let (v, dv) = psi(lam);
        if v.is_nan() {
            return Err(Error::ReducedSolve(format!("secular function undefined at {lam}")));
        }
        if v > 0.0 {
            hi = lam;
        } else {
            lo = lam;
        }
        let sn = 1.0 / (v + sigma / lam);
        if (sn - lam / sigma).abs() <= tol * sn.max(lam / sigma) || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let newton = lam - v / dv;
        lam = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let step = sp.step(lam, &none);
    let residual = (step.norm() - lam / sigma).abs();
    if !(residual <= 1e-8 * (lam / sigma).max(1e-300) || residual <= 1e-10 * gnorm.max(1.0)) {
        return Err(Error::ReducedSolve(format!(
            "no convergence: residual {residual:e} at lambda {lam:e}"
        )));
    }
    Ok(SecularSolution {
        lambda: lam,
        step,
        residual,
        case: SecularCase::Easy,
        alpha: None,
        n_factorizations: 0,
    })
}

/// Extra acceptance test applied to a candidate full-space step.
pub type StepFilter<'f> = &'f dyn Fn(&DVector<f64>) -> Result<bool>;

/// Full-space secular solve by safeguarded Newton and secant iterations on
/// `psi`; every trial multiplier costs one counted factorization, which also
/// supplies the derivative.
///
/// The returned step satisfies `m(s) < m(0)` and
/// `|grad m(s)| <= theta1 |s|^2 / 2`, plus `filter` when given.
pub fn solve_secular_full_secant(
    ctx: &ModelContext<'_>,
    theta1: f64,
    filter: Option<StepFilter<'_>>,
    counter: &mut FactorizationCounter,
) -> Result<SecularSolution> {
    let g = ctx.gradient_at_origin();
    let h = ctx.hessian();
    let sigma = ctx.sigma();
    let start = counter.count();
    let gnorm = g.norm();
    let accept = |s: &DVector<f64>| -> Result<bool> {
        let p = ctx.at(s)?;
        let ok = p.is_stationary_enough(theta1) && p.cubic() < ctx.f0();
        Ok(ok && filter.map_or(Ok(true), |f| f(s))?)
    };

    if gnorm == 0.0 {
        let pd = match factorize_shifted(h, 0.0, counter) {
            Ok(f) => f.is_positive_definite(),
            Err(Error::SingularShift { .. }) => false,
            Err(e) => return Err(e),
        };
        if pd {
            return Ok(SecularSolution {
                lambda: 0.0,
                step: DVector::zeros(g.len()),
                residual: 0.0,
                case: SecularCase::Easy,
                alpha: None,
                n_factorizations: counter.count() - start,
            });
        }
        return hard_case(ctx, theta1, counter, start, &accept);
    }

    let lower_g = h.gershgorin_lower();
    let upper = (-lower_g).max(0.0) + (sigma * gnorm).sqrt();
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    // last two admissible evaluations (lambda, psi)
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut lam = upper;
    let mut last_pd: Option<(f64, DVector<f64>)> = None;

    for _ in 0..MAX_ITERS {
        let factor = match factorize_shifted(h, lam, counter) {
            Ok(f) if f.is_positive_definite() => Some(f),
            Ok(_) | Err(Error::SingularShift { .. }) => None,
            Err(e) => return Err(e),
        };
        let mut newton = None;
        match factor {
            None => lo = lo.max(lam),
            Some(f) => {
                let s = -f.solve(g);
                let sn = s.norm();
                let v = 1.0 / sn - sigma / lam;
                if accept(&s)? {
                    let residual = (sn - lam / sigma).abs();
                    return Ok(SecularSolution {
                        lambda: lam,
                        step: s,
                        residual,
                        case: SecularCase::Easy,
                        alpha: None,
                        n_factorizations: counter.count() - start,
                    });
                }
                if v > 0.0 {
                    hi = hi.min(lam);
                } else {
                    lo = lo.max(lam);
                }
                // Tangent of the concave 1/|s| against the exact sigma/lambda, and
                // Newton on the convex |s| - lambda/sigma: both land at or below the
                // root, so the larger is kept.
                let curv = s.dot(&f.solve(&s));
                let (a, b) = (1.0 / sn, curv / (sn * sn * sn));
                let c = a - b * lam;
                let disc = (c * c + 4.0 * b * sigma).sqrt();
                let on_tangent = if c >= 0.0 { 2.0 * sigma / (c + disc) } else { (disc - c) / (2.0 * b) };
                let on_norm = lam + (sn - lam / sigma) / (curv / sn + 1.0 / sigma);
                newton = [on_tangent, on_norm].into_iter().filter(|c| c.is_finite()).reduce(f64::max);
                pts.push((lam, v));
                if pts.len() > 2 {
                    pts.remove(0);
                }
                last_pd = Some((lam, s));
            }
        }
        if hi.is_finite() && hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
        let secant = match pts.as_slice() {
            [(l0, v0), (l1, v1)] if v1 != v0 => Some(l1 - v1 * (l1 - l0) / (v1 - v0)),
            _ => None,
        };
        let inside = |c: &f64| c.is_finite() && *c > lo && *c < hi;
        lam = match (newton.filter(inside), secant.filter(inside)) {
            (Some(c), _) | (None, Some(c)) => c,
            _ if hi.is_finite() && lo > 0.0 && hi > 4.0 * lo => (lo * hi).sqrt(),
            _ if hi.is_finite() => 0.5 * (lo + hi),
            _ => 2.0 * lam.max(1.0),
        };
    }

    if let Some((lam_pd, s)) = last_pd.filter(|(l, _)| hi.is_finite() && hi - lo <= 1e-8 * l.max(1.0)) {
        if accept(&s)? {
            let residual = (s.norm() - lam_pd / sigma).abs();
            return Ok(SecularSolution {
                lambda: lam_pd,
                step: s,
                residual,
                case: SecularCase::Easy,
                alpha: None,
                n_factorizations: counter.count() - start,
            });
        }
    }
    hard_case(ctx, theta1, counter, start, &accept)
}

fn hard_case(
    ctx: &ModelContext<'_>,
    theta1: f64,
    counter: &mut FactorizationCounter,
    start: usize,
    accept: &dyn Fn(&DVector<f64>) -> Result<bool>,
) -> Result<SecularSolution> {
    let g = ctx.gradient_at_origin();
    let h = ctx.hessian();
    let sigma = ctx.sigma();
    let n = g.len();
    let (lam1, v1) = second_order::min_eig(h, true)?;
    let v1 = v1.ok_or_else(|| Error::FullSolve("no leftmost eigenvector".into()))?;
    if lam1 >= 0.0 {
        return Err(Error::FullSolve(format!(
            "secant bracket collapsed with lambda_min = {lam1:e} >= 0 (theta1 = {theta1})"
        )));
    }
    let lam_s = -lam1;
    let target = lam_s / sigma;
    let pinv = if n <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(h.to_dense());
        let tol = 1e-10 * eig.eigenvalues.amax().max(1.0);
        let mut s = DVector::zeros(n);
        for i in 0..n {
            let d = eig.eigenvalues[i] + lam_s;
            if d > tol {
                let q = eig.eigenvectors.column(i);
                s.axpy(-q.dot(g) / d, &q, 1.0);
            }
        }
        s
    } else {
        let delta = 1e-8 * (1.0 + lam_s);
        let f = factorize_shifted(h, lam_s + delta, counter)?;
        let mut x = f.solve(g);
        let c = v1.dot(&x);
        x.axpy(-c, &v1, 1.0);
        -x
    };
    let p = pinv.norm();
    let alpha = if p < target { (target * target - p * p).sqrt() } else { 0.0 };
    let mut step = pinv;
    step.axpy(alpha, &v1, 1.0);
    if !accept(&step)? {
        let mut flipped = step.clone();
        flipped.axpy(-2.0 * alpha, &v1, 1.0);
        if accept(&flipped)? {
            step = flipped;
        } else {
            return Err(Error::FullSolve(format!(
                "hard-case step at lambda = {lam_s:e} fails the acceptance tests"
            )));
        }
    }
    let residual = (step.norm() - target).abs();
    Ok(SecularSolution {
        lambda: lam_s,
        step,
        residual,
        case: SecularCase::Hard,
        alpha: Some(alpha),
        n_factorizations: counter.count() - start,
    })
}
