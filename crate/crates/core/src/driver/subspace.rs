//! Cubic model minimization over a frozen or freshly built Krylov space.

use nalgebra::DVector;

use super::SolverConfig;
use crate::error::{Error, Result};
use crate::krylov::{augment_columns, project_with_products, AugmentedBasis, Expansion, KrylovBasis, SpaceKind};
use crate::linalg::SymMatrix;
use crate::model::ModelContext;
use crate::second_order::EIG_RTOL;
use crate::secular::{solve_secular_reduced, FactorizationCounter};

/// Relative weight below which the reduced gradient is treated as
/// orthogonal to the leftmost eigenspace.
const REDUCED_HARD_CASE_RTOL: f64 = 1e-12;

/// Extra acceptance test of the second-order variant.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureTest {
    pub theta2: f64,
}

#[derive(Clone, Debug)]
pub struct SubspaceResult {
    /// `sigma |s_hat|`.
    pub lambda_hat: f64,
    /// Multiplier found by the reduced solve.
    pub lambda_reduced: f64,
    pub s_hat: DVector<f64>,
    pub w: AugmentedBasis,
    /// `W s_hat`.
    pub step: DVector<f64>,
    /// `H W s_hat`, from the products formed for the projection.
    pub hs: DVector<f64>,
    /// Whether `W s_hat` passes the stationarity test (and the curvature
    /// test when one was requested).
    pub acceptable: bool,
    pub model_curvature: Option<f64>,
    /// Space carried to the next iteration.
    pub basis: KrylovBasis,
    pub rational_solves: usize,
}

struct Candidate {
    w: AugmentedBasis,
    s_hat: DVector<f64>,
    lambda_reduced: f64,
    step: DVector<f64>,
    hs: DVector<f64>,
    acceptable: bool,
    model_curvature: Option<f64>,
    ritz: Vec<f64>,
}

fn gershgorin_interval(h: &SymMatrix) -> (f64, f64) {
    let lo = h.gershgorin_lower();
    let hi = -match h {
        SymMatrix::Dense(m) => SymMatrix::Dense(-m).gershgorin_lower(),
        SymMatrix::Sparse(_) => {
            let d = h.diagonal();
            let r = h.max_abs() * (h.n() as f64);
            return (lo, d.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v)) + r);
        }
    };
    (lo, hi)
}

/// Minimizes the model over `orth([columns, g])`; `hv` holds `H c` for each
/// column.
fn candidate(
    ctx: &ModelContext<'_>,
    columns: &[DVector<f64>],
    hv: &[DVector<f64>],
    cfg: &SolverConfig,
    curvature: Option<CurvatureTest>,
) -> Result<Candidate> {
    let g = ctx.gradient_at_origin();
    let h = ctx.hessian();
    let w = if g.norm() > 0.0 {
        augment_columns(columns, g)?
    } else {
        AugmentedBasis { w: columns.to_vec(), contains_gradient: true, appended: false }
    };
    if w.dim() == 0 {
        return Err(Error::Contract("empty projection space".into()));
    }
    let mut products = hv.to_vec();
    if w.appended {
        products.push(h.matvec(w.w.last().expect("appended column")));
    }
    let proj = project_with_products(g, &w, products);
    let sol = solve_secular_reduced(&proj.g_r, &proj.h_r, ctx.sigma(), REDUCED_HARD_CASE_RTOL)?;
    let ritz = proj.h_r.symmetric_eigenvalues().iter().copied().collect();
    let step = w.lift(&sol.step);
    let mut hs = DVector::zeros(g.len());
    for (p, c) in proj.hw.iter().zip(sol.step.iter()) {
        hs.axpy(*c, p, 1.0);
    }
    let point = ctx.at_with_product(step, hs)?;
    let mut acceptable = point.is_stationary_enough(cfg.theta1);
    let step_norm = point.norm();
    let (step, hs) = (point.step().clone(), point.hs().clone());
    let mut model_curvature = None;
    if acceptable {
        if let Some(test) = curvature {
            let mu = ctx.curvature_min(&step)?;
            let tol = EIG_RTOL * (h.max_abs() + 2.0 * ctx.sigma() * step_norm);
            acceptable = mu >= -test.theta2 * step_norm - tol;
            model_curvature = Some(mu);
        }
    }
    Ok(Candidate { w, s_hat: sol.step, lambda_reduced: sol.lambda, step, hs, acceptable, model_curvature, ritz })
}

fn finish(ctx: &ModelContext<'_>, c: Candidate, basis: KrylovBasis, rational_solves: usize) -> SubspaceResult {
    SubspaceResult {
        lambda_hat: ctx.sigma() * c.s_hat.norm(),
        lambda_reduced: c.lambda_reduced,
        s_hat: c.s_hat,
        w: c.w,
        step: c.step,
        hs: c.hs,
        acceptable: c.acceptable,
        model_curvature: c.model_curvature,
        basis,
        rational_solves,
    }
}

fn expand(
    basis: &mut KrylovBasis,
    h: &SymMatrix,
    solves: &mut FactorizationCounter,
) -> Result<Option<DVector<f64>>> {
    let before = basis.dim();
    let outcome = match basis.kind() {
        SpaceKind::Polynomial => basis.poly_expand(h),
        SpaceKind::Rational => {
            let interval = basis.spectral_interval().unwrap_or_else(|| gershgorin_interval(h));
            basis.rational_expand(h, interval, solves)
        }
    };
    match outcome {
        Ok(Expansion::Added) => {
            debug_assert_eq!(basis.dim(), before + 1);
            Ok(Some(h.matvec(basis.columns().last().expect("just added"))))
        }
        Ok(Expansion::Invariant) | Err(Error::Capacity { .. }) | Err(Error::ShiftFailure { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// One call of the projected minimization.
///
/// With `refresh` the space is rebuilt from `seed`, expanding one vector at
/// a time until the projected step is acceptable or `j_max - 1` projections
/// were tried; otherwise `frozen` is reused with a single projection.
pub fn subspace_minimize(
    ctx: &ModelContext<'_>,
    frozen: Option<&KrylovBasis>,
    refresh: bool,
    seed: &DVector<f64>,
    iteration: usize,
    cfg: &SolverConfig,
    curvature: Option<CurvatureTest>,
) -> Result<SubspaceResult> {
    let h = ctx.hessian();
    let g = ctx.gradient_at_origin();
    if g.norm() == 0.0 && seed.norm() == 0.0 {
        return Err(Error::Contract("subspace minimization needs a nonzero gradient or seed".into()));
    }
    let mut solves = FactorizationCounter::new();

    if !refresh {
        let mut basis = frozen.ok_or_else(|| Error::Contract("no frozen space to project onto".into()))?.clone();
        let hv: Vec<_> = basis.columns().iter().map(|c| h.matvec(c)).collect();
        let c = candidate(ctx, basis.columns(), &hv, cfg, curvature)?;
        basis.observe_ritz(&c.ritz);
        return Ok(finish(ctx, c, basis, 0));
    }

    let capacity = cfg.j_max.min(ctx.n()).max(1);
    let mut basis = match cfg.space_kind {
        SpaceKind::Polynomial => KrylovBasis::polynomial(seed, capacity, iteration)?,
        SpaceKind::Rational => KrylovBasis::rational(seed, capacity, iteration)?,
    };
    let mut hv: Vec<DVector<f64>> = basis.columns().iter().map(|c| h.matvec(c)).collect();
    if basis.dim() == 0 && g.norm() == 0.0 {
        match expand(&mut basis, h, &mut solves)? {
            Some(p) => hv.push(p),
            None => return Err(Error::ReducedSolve("could not start the rational space".into())),
        }
    }
    let inner = cfg.j_max.saturating_sub(1).max(1);
    let mut j = 1;
    loop {
        let c = candidate(ctx, basis.columns(), &hv, cfg, curvature)?;
        basis.observe_ritz(&c.ritz);
        if c.acceptable || j == inner {
            return Ok(finish(ctx, c, basis, solves.count()));
        }
        match expand(&mut basis, h, &mut solves)? {
            Some(p) => hv.push(p),
            None => return Ok(finish(ctx, c, basis, solves.count())),
        }
        j += 1;
    }
}
