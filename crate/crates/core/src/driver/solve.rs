//! Outer loops of AR2, FAR2 and FAR2-SO.

use std::time::Instant;

use nalgebra::DVector;

use super::report::{IterationRecord, MonitorSummary, RunReport, SolverCounters, Status, StepKind};
use super::subspace::{subspace_minimize, CurvatureTest};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::krylov::{KrylovBasis, SpaceKind};
use crate::linalg::SymMatrix;
use crate::model::ModelContext;
use crate::problems::{EvalOrder, ObjectiveProblem};
use crate::second_order::{min_eig, SecondOrderConfig, EIG_RTOL};
use crate::secular::{factorize_shifted, solve_secular_full_secant, FactorizationCounter};

/// Absolute floor of the gradient tolerance, relative to `1 + |f_0|`.
const GRADIENT_FLOOR: f64 = 1e-14;
/// Slack for rounding in the per-step decrease checks.
const MONITOR_RTOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct NewtonStep {
    pub step: DVector<f64>,
    /// `s^T (H + lambda I) s > 0`, evaluated as `s^T g < 0`.
    pub curvature_ok: bool,
    /// `H + lambda I` has positive inertia only.
    pub positive_definite: bool,
}

/// `s = -(H + lambda_hat I)^{-1} g` with one counted factorization; a
/// singular shift yields a zero step that fails both tests.
pub fn regularized_newton_step(
    h: &SymMatrix,
    g: &DVector<f64>,
    lambda_hat: f64,
    counter: &mut FactorizationCounter,
) -> Result<NewtonStep> {
    if !(lambda_hat >= 0.0) {
        return Err(Error::Contract(format!("lambda_hat must be nonnegative, got {lambda_hat}")));
    }
    crate::error::check_dim(h.n(), g.len())?;
    let factor = match factorize_shifted(h, lambda_hat, counter) {
        Ok(f) => f,
        Err(Error::SingularShift { .. }) => {
            return Ok(NewtonStep { step: DVector::zeros(g.len()), curvature_ok: false, positive_definite: false })
        }
        Err(e) => return Err(e),
    };
    let step = -factor.solve(g);
    if step.iter().any(|v| !v.is_finite()) {
        return Ok(NewtonStep { step: DVector::zeros(g.len()), curvature_ok: false, positive_definite: false });
    }
    let curvature_ok = step.dot(g) < 0.0;
    Ok(NewtonStep { step, curvature_ok, positive_definite: factor.is_positive_definite() })
}

/// `c_low |s_hat| <= |s| <= c_up |s_hat|`.
pub fn step_ratio_ok(s: &DVector<f64>, s_hat: &DVector<f64>, cfg: &SolverConfig) -> Result<bool> {
    let sh = s_hat.norm();
    if sh == 0.0 {
        return Err(Error::Contract("reference step is zero".into()));
    }
    let ratio = s.norm() / sh;
    Ok(ratio >= cfg.c_low && ratio <= cfg.c_up)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Acceptance {
    pub accepted: bool,
    pub sigma_next: f64,
    pub rho: f64,
}

/// Ratio test and regularization update; `taylor_decrease` is `T(0) - T(s)`.
pub fn acceptance_and_sigma_update(
    f: f64,
    f_trial: f64,
    taylor_decrease: f64,
    sigma: f64,
    cfg: &SolverConfig,
) -> Result<Acceptance> {
    if !(taylor_decrease > 0.0) {
        return Err(Error::Invariant(format!("nonpositive model decrease {taylor_decrease:e}")));
    }
    let rho = if f_trial.is_finite() { (f - f_trial) / taylor_decrease } else { f64::NEG_INFINITY };
    let sigma_next = if rho >= cfg.eta2 {
        cfg.sigma_min.max(cfg.gamma1 * sigma)
    } else if rho >= cfg.eta1 {
        sigma
    } else {
        cfg.gamma2 * sigma
    };
    Ok(Acceptance { accepted: rho >= cfg.eta1, sigma_next, rho })
}

#[derive(Clone, Copy, Debug)]
enum Mode {
    Ar2,
    Far2,
    Far2So { theta2: f64, eps_h: f64 },
}

impl Mode {
    fn label(self, kind: SpaceKind) -> &'static str {
        match (self, kind) {
            (Mode::Ar2, _) => "AR2",
            (Mode::Far2, SpaceKind::Polynomial) => "FAR2-PK",
            (Mode::Far2, SpaceKind::Rational) => "FAR2-RK",
            (Mode::Far2So { .. }, SpaceKind::Polynomial) => "FAR2-SO",
            (Mode::Far2So { .. }, SpaceKind::Rational) => "FAR2-SO-RK",
        }
    }

    fn curvature(self) -> Option<CurvatureTest> {
        match self {
            Mode::Far2So { theta2, .. } => Some(CurvatureTest { theta2 }),
            _ => None,
        }
    }
}

/// AR2: every step from the full-space secular solve.
pub fn ar2_solve(problem: &mut ObjectiveProblem, cfg: &SolverConfig) -> RunReport {
    run(problem, cfg, Mode::Ar2)
}

/// FAR2 with the space kind of `cfg`.
pub fn far2_solve(problem: &mut ObjectiveProblem, cfg: &SolverConfig) -> RunReport {
    run(problem, cfg, Mode::Far2)
}

pub(crate) fn run_far2so(problem: &mut ObjectiveProblem, cfg: &SecondOrderConfig) -> RunReport {
    if let Err(e) = cfg.validate() {
        return invalid(problem, &cfg.base, Mode::Far2So { theta2: cfg.theta2, eps_h: cfg.eps_h }, e);
    }
    run(problem, &cfg.base, Mode::Far2So { theta2: cfg.theta2, eps_h: cfg.eps_h })
}

fn invalid(problem: &ObjectiveProblem, cfg: &SolverConfig, mode: Mode, e: Error) -> RunReport {
    RunReport {
        solver: mode.label(cfg.space_kind).into(),
        problem: problem.name().into(),
        n: problem.n(),
        status: Status::SolveFailure,
        x_final: problem.x0().iter().copied().collect(),
        f_final: f64::NAN,
        gnorm_final: f64::NAN,
        gnorm0: f64::NAN,
        counters: SolverCounters::default(),
        evals: problem.counters(),
        sigma_max: cfg.sigma0,
        monitor: MonitorSummary::default(),
        message: Some(e.to_string()),
        wall_s: 0.0,
        trace: Vec::new(),
    }
}

/// A trial step with what is needed to evaluate it.
struct Trial {
    step: DVector<f64>,
    hs: DVector<f64>,
    kind: StepKind,
    s_hat_norm: Option<f64>,
    lambda_hat: Option<f64>,
    lambda_reduced: Option<f64>,
    model_curvature: Option<f64>,
}

enum Outcome {
    Trial(Trial),
    /// The subspace failed on a frozen space; rebuild it next iteration.
    Club { s_hat_norm: Option<f64>, lambda_hat: Option<f64>, lambda_reduced: Option<f64> },
}

struct Engine<'p> {
    problem: &'p mut ObjectiveProblem,
    cfg: SolverConfig,
    mode: Mode,
    counters: SolverCounters,
    monitor: MonitorSummary,
    factorizations: FactorizationCounter,
    subspace_dims: Vec<usize>,
    last_dim: Option<usize>,
    trace: Vec<IterationRecord>,
}

fn run(problem: &mut ObjectiveProblem, cfg: &SolverConfig, mode: Mode) -> RunReport {
    if let Err(e) = cfg.validate() {
        return invalid(problem, cfg, mode, e);
    }
    let mut engine = Engine {
        problem,
        cfg: cfg.clone(),
        mode,
        counters: SolverCounters::default(),
        monitor: MonitorSummary::default(),
        factorizations: FactorizationCounter::new(),
        subspace_dims: Vec::new(),
        last_dim: None,
        trace: Vec::new(),
    };
    engine.iterate()
}

impl Engine<'_> {
    fn iterate(&mut self) -> RunReport {
        let clock = Instant::now();
        let mut x = self.problem.x0();
        let ev = self.problem.eval(&x, EvalOrder::Hessian);
        let mut f = ev.f;
        let mut g = ev.g.expect("gradient requested");
        let mut h = ev.h.expect("Hessian requested");
        let gnorm0 = g.norm();
        let eps = (self.cfg.eps_rel * gnorm0).max(GRADIENT_FLOOR * (1.0 + f.abs()));
        let mut sigma = self.cfg.sigma0;
        let mut sigma_max = sigma;
        let mut refresh = true;
        let mut basis: Option<KrylovBasis> = None;
        let mut message = None;

        let status = loop {
            if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
                message = Some("non-finite objective or gradient".to_string());
                break Status::SolveFailure;
            }
            let gnorm = g.norm();
            let mut seed = g.clone();
            if gnorm <= eps {
                match self.mode {
                    Mode::Far2So { eps_h, .. } => match min_eig(&h, true) {
                        Ok((lam, _)) if lam >= -eps_h => break Status::SecondOrderPoint,
                        // leftmost eigenvector seeds the space; g is still appended to W
                        Ok((_, v)) => seed = v.expect("eigenvector requested"),
                        Err(e) => {
                            message = Some(e.to_string());
                            break Status::SolveFailure;
                        }
                    },
                    _ => break Status::FirstOrderPoint,
                }
            }
            if self.trace.len() >= self.cfg.max_iters {
                break Status::IterLimit;
            }
            if clock.elapsed().as_secs_f64() > self.cfg.time_limit {
                break Status::TimeLimit;
            }
            let k = self.trace.len();
            let outcome = match self.step(f, &g, &h, sigma, refresh, &mut basis, &seed, k) {
                Ok(o) => o,
                Err(e) => {
                    message = Some(e.to_string());
                    break Status::SolveFailure;
                }
            };
            let mut record = IterationRecord {
                k,
                f,
                gnorm,
                sigma,
                kind: StepKind::Rejected,
                accepted: false,
                refresh,
                dim: self.last_dim,
                rho: None,
                taylor_decrease: None,
                f_decrease: None,
                s_norm: None,
                s_hat_norm: None,
                lambda_hat: None,
                lambda_reduced: None,
                model_curvature: None,
            };
            let trial = match outcome {
                Outcome::Club { s_hat_norm, lambda_hat, lambda_reduced } => {
                    record.s_hat_norm = s_hat_norm;
                    record.lambda_hat = lambda_hat;
                    record.lambda_reduced = lambda_reduced;
                    self.counters.n_unsuccessful_club += 1;
                    self.trace.push(record);
                    refresh = true;
                    continue;
                }
                Outcome::Trial(t) => t,
            };
            record.kind = trial.kind;
            record.s_norm = Some(trial.step.norm());
            record.s_hat_norm = trial.s_hat_norm;
            record.lambda_hat = trial.lambda_hat;
            record.lambda_reduced = trial.lambda_reduced;
            record.model_curvature = trial.model_curvature;

            let ctx = ModelContext::new(f, &g, &h, sigma).expect("validated model data");
            let point = ctx.at_with_product(trial.step.clone(), trial.hs.clone()).expect("dimensions agree");
            let decrease = point.taylor_decrease();
            let x_trial = &x + &trial.step;
            let f_trial = self.problem.eval(&x_trial, EvalOrder::Value).f;
            let acc = match acceptance_and_sigma_update(f, f_trial, decrease, sigma, &self.cfg) {
                Ok(a) => a,
                Err(e) => {
                    record.taylor_decrease = Some(decrease);
                    self.trace.push(record);
                    message = Some(format!("{e} ({:?} step at iteration {k})", trial.kind));
                    break Status::SolveFailure;
                }
            };
            record.rho = acc.rho.is_finite().then_some(acc.rho);
            record.taylor_decrease = Some(decrease);
            record.f_decrease = f_trial.is_finite().then_some(f - f_trial);
            record.accepted = acc.accepted;
            if acc.accepted {
                self.check_accepted(&record, &trial, decrease, f - f_trial, sigma);
                self.counters.n_successful += 1;
                match trial.kind {
                    StepKind::Subspace => self.counters.n_subspace_steps += 1,
                    StepKind::RegNewton => self.counters.n_newton_steps += 1,
                    _ => {}
                }
                x = x_trial;
                f = f_trial;
                let (gn, hn) = self.problem.derivatives(&x);
                g = gn;
                h = hn;
            } else {
                self.counters.n_unsuccessful_rho += 1;
            }
            self.trace.push(record);
            sigma = acc.sigma_next;
            if sigma < self.cfg.sigma_min {
                self.monitor.sigma_floor_violations += 1;
            }
            sigma_max = sigma_max.max(sigma);
            refresh = false;
        };

        self.counters.n_nli = self.trace.len();
        self.counters.n_fact = self.factorizations.count() + self.counters.n_rational_solves;
        self.counters.ave_subspace_dim = if self.subspace_dims.is_empty() {
            0.0
        } else {
            self.subspace_dims.iter().sum::<usize>() as f64 / self.subspace_dims.len() as f64
        };
        RunReport {
            solver: self.mode.label(self.cfg.space_kind).into(),
            problem: self.problem.name().into(),
            n: self.problem.n(),
            status,
            x_final: x.iter().copied().collect(),
            f_final: f,
            gnorm_final: g.norm(),
            gnorm0,
            counters: self.counters,
            evals: self.problem.counters(),
            sigma_max,
            monitor: self.monitor,
            message,
            wall_s: clock.elapsed().as_secs_f64(),
            trace: std::mem::take(&mut self.trace),
        }
    }

    /// Step 2: returns the trial step or a rejection without one.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        f: f64,
        g: &DVector<f64>,
        h: &SymMatrix,
        sigma: f64,
        refresh: bool,
        basis: &mut Option<KrylovBasis>,
        seed: &DVector<f64>,
        k: usize,
    ) -> Result<Outcome> {
        self.last_dim = None;
        let ctx = ModelContext::new(f, g, h, sigma)?;
        if matches!(self.mode, Mode::Ar2) {
            return self.secant(&ctx).map(Outcome::Trial);
        }
        if refresh {
            self.counters.n_refresh += 1;
        }
        let curvature = self.mode.curvature();
        let sub = match subspace_minimize(&ctx, basis.as_ref(), refresh, seed, k, &self.cfg, curvature) {
            Ok(s) => s,
            Err(Error::ReducedSolve(_)) | Err(Error::EigFailure(_)) if !refresh => {
                return Ok(Outcome::Club { s_hat_norm: None, lambda_hat: None, lambda_reduced: None });
            }
            Err(Error::ReducedSolve(_)) | Err(Error::EigFailure(_)) => {
                return self.secant(&ctx).map(Outcome::Trial);
            }
            Err(e) => return Err(e),
        };
        self.counters.n_rational_solves += sub.rational_solves;
        self.subspace_dims.push(sub.w.dim());
        self.last_dim = Some(sub.w.dim());
        let s_hat_norm = sub.s_hat.norm();
        let lambda_hat = sub.lambda_hat;
        let lambda_reduced = sub.lambda_reduced;
        let model_curvature = sub.model_curvature;
        *basis = Some(sub.basis);
        if sub.acceptable {
            return Ok(Outcome::Trial(Trial {
                step: sub.step,
                hs: sub.hs,
                kind: StepKind::Subspace,
                s_hat_norm: Some(s_hat_norm),
                lambda_hat: Some(lambda_hat),
                lambda_reduced: Some(lambda_reduced),
                model_curvature,
            }));
        }
        let newton = regularized_newton_step(h, g, lambda_hat, &mut self.factorizations)?;
        let gate = match self.mode {
            Mode::Far2So { .. } => newton.positive_definite,
            _ => newton.curvature_ok,
        };
        let ratio_ok = s_hat_norm > 0.0 && step_ratio_ok(&newton.step, &sub.s_hat, &self.cfg)?;
        if gate && ratio_ok {
            let hs = h.matvec(&newton.step);
            let model_curvature = match curvature {
                Some(_) => Some(ctx.curvature_min(&newton.step)?),
                None => None,
            };
            return Ok(Outcome::Trial(Trial {
                step: newton.step,
                hs,
                kind: StepKind::RegNewton,
                s_hat_norm: Some(s_hat_norm),
                lambda_hat: Some(lambda_hat),
                lambda_reduced: Some(lambda_reduced),
                model_curvature,
            }));
        }
        if refresh {
            let mut t = self.secant(&ctx)?;
            t.s_hat_norm = Some(s_hat_norm);
            t.lambda_hat = Some(lambda_hat);
            t.lambda_reduced = Some(lambda_reduced);
            return Ok(Outcome::Trial(t));
        }
        Ok(Outcome::Club {
            s_hat_norm: Some(s_hat_norm),
            lambda_hat: Some(lambda_hat),
            lambda_reduced: Some(lambda_reduced),
        })
    }

    fn secant(&mut self, ctx: &ModelContext<'_>) -> Result<Trial> {
        self.counters.n_secant_calls += 1;
        let h = ctx.hessian();
        let curvature = self.mode.curvature();
        let filter = |s: &DVector<f64>| -> Result<bool> {
            match curvature {
                None => Ok(true),
                Some(test) => {
                    let sn = s.norm();
                    let mu = ctx.curvature_min(s)?;
                    let tol = EIG_RTOL * (h.max_abs() + 2.0 * ctx.sigma() * sn);
                    Ok(mu >= -test.theta2 * sn - tol)
                }
            }
        };
        let sol = solve_secular_full_secant(ctx, self.cfg.theta1, Some(&filter), &mut self.factorizations)?;
        let model_curvature = match curvature {
            Some(_) => Some(ctx.curvature_min(&sol.step)?),
            None => None,
        };
        let hs = h.matvec(&sol.step);
        Ok(Trial {
            step: sol.step,
            hs,
            kind: StepKind::Secant,
            s_hat_norm: None,
            lambda_hat: None,
            lambda_reduced: None,
            model_curvature,
        })
    }

    fn check_accepted(&mut self, rec: &IterationRecord, trial: &Trial, decrease: f64, f_drop: f64, sigma: f64) {
        self.monitor.checked_steps += 1;
        let sn = trial.step.norm();
        let bound = match trial.kind {
            StepKind::RegNewton => 0.5 * sigma * trial.s_hat_norm.unwrap_or(0.0) * sn * sn,
            _ => sigma * sn.powi(3) / 3.0,
        };
        if decrease < bound * (1.0 - MONITOR_RTOL) {
            self.monitor.taylor_violations += 1;
        }
        if f_drop < self.cfg.eta1 * decrease {
            self.monitor.sufficient_decrease_violations += 1;
        }
        if let (Some(lh), Some(lr)) = (rec.lambda_hat, rec.lambda_reduced) {
            if (lh - lr).abs() > 1e-8 * lh.abs().max(lr.abs()).max(f64::MIN_POSITIVE) {
                self.monitor.lambda_violations += 1;
            }
        }
        if sigma < self.cfg.sigma_min {
            self.monitor.sigma_floor_violations += 1;
        }
        if let Mode::Far2So { theta2, .. } = self.mode {
            if let Some(mu) = trial.model_curvature {
                if mu < -theta2 * sn - EIG_RTOL * (1.0 + mu.abs()) {
                    self.monitor.curvature_violations += 1;
                }
            }
        }
    }
}
