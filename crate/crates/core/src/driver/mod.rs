//! AR2 and FAR2 outer iterations: step computation, acceptance test and
//! the regularization update.

mod config;
mod report;
mod solve;
mod subspace;

pub use config::SolverConfig;
pub use report::{IterationRecord, MonitorSummary, RunReport, SolverCounters, Status, StepKind};
pub(crate) use solve::run_far2so;
pub use solve::{
    acceptance_and_sigma_update, ar2_solve, far2_solve, regularized_newton_step, step_ratio_ok, Acceptance,
    NewtonStep,
};
pub use subspace::{subspace_minimize, CurvatureTest, SubspaceResult};
