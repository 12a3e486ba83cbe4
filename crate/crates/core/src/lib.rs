//! Adaptive cubic regularization (AR2) and its frozen-subspace variant (FAR2)
//! for smooth unconstrained minimization.
//!
//! The step of FAR2 minimizes the cubic model over a low-dimensional Krylov
//! space that is kept across iterations. When the projected step is not
//! accurate enough, a regularized Newton step with the multiplier inherited
//! from the subspace problem is tried, and only if that also fails the full
//! secular equation is solved.

// `!(a > b)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod exec;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod model;
pub mod problems;
pub mod second_order;
pub mod secular;

pub use driver::{ar2_solve, far2_solve, RunReport, SolverConfig, Status, StepKind};
pub use error::{Error, Result};
pub use exec::Exec;
pub use krylov::{KrylovBasis, SpaceKind};
pub use linalg::SymMatrix;
pub use model::ModelContext;
pub use problems::{get_problem, ObjectiveProblem};
pub use second_order::{far2so_solve, min_eig, SecondOrderConfig};
