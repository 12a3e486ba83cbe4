use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::SpaceKind;

/// Parameters of the AR2 and FAR2 outer loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub theta1: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    pub c_low: f64,
    pub c_up: f64,
    pub j_max: usize,
    /// Stop when `|g| <= eps_rel |g_0|`.
    pub eps_rel: f64,
    pub max_iters: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    pub space_kind: SpaceKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta1: 0.1,
            eta2: 0.8,
            gamma1: 0.1,
            gamma2: 2.0,
            theta1: 0.1,
            sigma0: 1.0,
            sigma_min: 1e-8,
            c_low: 1e-20,
            c_up: 1e20,
            j_max: 50,
            eps_rel: 1e-6,
            max_iters: 5000,
            time_limit: 7200.0,
            space_kind: SpaceKind::Polynomial,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let all = [
            self.eta1,
            self.eta2,
            self.gamma1,
            self.gamma2,
            self.theta1,
            self.sigma0,
            self.sigma_min,
            self.c_low,
            self.c_up,
            self.eps_rel,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if !(0.0 < self.eta1 && self.eta1 <= self.eta2 && self.eta2 < 1.0) {
            return bad(format!("need 0 < eta1 <= eta2 < 1, got {} and {}", self.eta1, self.eta2));
        }
        if !(0.0 < self.gamma1 && self.gamma1 < 1.0 && 1.0 < self.gamma2) {
            return bad(format!("need 0 < gamma1 < 1 < gamma2, got {} and {}", self.gamma1, self.gamma2));
        }
        if !(self.theta1 > 0.0) {
            return bad(format!("theta1 must be positive, got {}", self.theta1));
        }
        if !(0.0 < self.sigma_min && self.sigma_min <= self.sigma0) {
            return bad(format!("need 0 < sigma_min <= sigma0, got {} and {}", self.sigma_min, self.sigma0));
        }
        if !(0.0 < self.c_low && self.c_low < self.c_up) {
            return bad(format!("need 0 < c_low < c_up, got {} and {}", self.c_low, self.c_up));
        }
        if self.j_max == 0 {
            return bad("j_max must be at least 1".into());
        }
        if !(self.eps_rel > 0.0) {
            return bad(format!("eps_rel must be positive, got {}", self.eps_rel));
        }
        if !(self.time_limit > 0.0) {
            return bad(format!("time limit must be positive, got {}", self.time_limit));
        }
        Ok(())
    }
}
