use serde::{Deserialize, Serialize};

use crate::problems::EvalCounters;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    FirstOrderPoint,
    SecondOrderPoint,
    IterLimit,
    TimeLimit,
    SolveFailure,
}

impl Status {
    pub fn converged(self) -> bool {
        matches!(self, Status::FirstOrderPoint | Status::SecondOrderPoint)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::FirstOrderPoint => "FirstOrderPoint",
            Status::SecondOrderPoint => "SecondOrderPoint",
            Status::IterLimit => "IterLimit",
            Status::TimeLimit => "TimeLimit",
            Status::SolveFailure => "SolveFailure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Status::FirstOrderPoint,
            Status::SecondOrderPoint,
            Status::IterLimit,
            Status::TimeLimit,
            Status::SolveFailure,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }
}

/// How the trial step of an iteration was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    /// `W s_hat` from the projected problem.
    Subspace,
    /// `-(H + lambda_hat I)^{-1} g`.
    RegNewton,
    /// Full-space secular solve.
    Secant,
    /// Subspace rejected without a trial point; the space is rebuilt next.
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f: f64,
    pub gnorm: f64,
    pub sigma: f64,
    pub kind: StepKind,
    pub accepted: bool,
    pub refresh: bool,
    /// Columns of `W`; `None` for AR2.
    pub dim: Option<usize>,
    pub rho: Option<f64>,
    pub taylor_decrease: Option<f64>,
    pub f_decrease: Option<f64>,
    pub s_norm: Option<f64>,
    pub s_hat_norm: Option<f64>,
    pub lambda_hat: Option<f64>,
    /// Multiplier returned by the reduced secular solve.
    pub lambda_reduced: Option<f64>,
    /// Smallest eigenvalue of the model Hessian at the step, when checked.
    pub model_curvature: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverCounters {
    pub n_nli: usize,
    pub n_fact: usize,
    pub n_refresh: usize,
    pub ave_subspace_dim: f64,
    pub n_subspace_steps: usize,
    pub n_newton_steps: usize,
    pub n_secant_calls: usize,
    pub n_successful: usize,
    pub n_unsuccessful_rho: usize,
    pub n_unsuccessful_club: usize,
    pub n_rational_solves: usize,
}

/// Per-step checks of the decrease inequalities the analysis relies on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub checked_steps: usize,
    /// Taylor decrease below `sigma |s|^3 / 3`, or `sigma |s_hat| |s|^2 / 2`
    /// for regularized Newton steps.
    pub taylor_violations: usize,
    pub sufficient_decrease_violations: usize,
    /// `lambda_hat` away from `sigma |s_hat|` by more than `1e-8` relative.
    pub lambda_violations: usize,
    pub sigma_floor_violations: usize,
    /// Accepted second-order steps whose model curvature is below `-theta2 |s|`.
    pub curvature_violations: usize,
}

impl MonitorSummary {
    pub fn total(&self) -> usize {
        self.taylor_violations
            + self.sufficient_decrease_violations
            + self.lambda_violations
            + self.sigma_floor_violations
            + self.curvature_violations
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: String,
    pub problem: String,
    pub n: usize,
    pub status: Status,
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub gnorm_final: f64,
    pub gnorm0: f64,
    pub counters: SolverCounters,
    pub evals: EvalCounters,
    pub sigma_max: f64,
    pub monitor: MonitorSummary,
    pub message: Option<String>,
    pub wall_s: f64,
    pub trace: Vec<IterationRecord>,
}

impl RunReport {
    /// Whether the running maximum of sigma stopped growing over the last
    /// quarter of the iterations.
    pub fn sigma_max_stabilized(&self) -> bool {
        if !self.sigma_max.is_finite() {
            return false;
        }
        if self.trace.len() < 4 {
            return true;
        }
        let cut = self.trace.len() - self.trace.len() / 4;
        let early = self.trace[..cut].iter().map(|r| r.sigma).fold(0.0, f64::max);
        let all = self.trace.iter().map(|r| r.sigma).fold(0.0, f64::max);
        all <= early
    }

    /// Values of `f` at the successful iterations, in order.
    pub fn accepted_values(&self) -> Vec<f64> {
        self.trace.iter().filter(|r| r.accepted).map(|r| r.f).collect()
    }
}
