//! Polynomial and rational Krylov bases with full reorthogonalization,
//! gradient augmentation, and Galerkin projection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{orthogonalize, SymMatrix};
use crate::secular::FactorizationCounter;

/// Relative tolerance for detecting an invariant subspace.
pub const BREAKDOWN_RTOL: f64 = 1e-12;

/// Number of candidate shifts tried by the adaptive selection.
const SHIFT_CANDIDATES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SpaceKind {
    Polynomial,
    Rational,
}

/// Outcome of an expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expansion {
    Added,
    /// The space is invariant; nothing was appended.
    Invariant,
}

/// Orthonormal basis of a Krylov space and how it was built.
#[derive(Clone, Debug)]
pub struct KrylovBasis {
    columns: Vec<DVector<f64>>,
    kind: SpaceKind,
    shifts: Vec<f64>,
    generator_iteration: usize,
    capacity: usize,
    seed: DVector<f64>,
    interval: Option<(f64, f64)>,
    ritz: Vec<f64>,
    invariant: bool,
}

impl KrylovBasis {
    /// Polynomial basis whose first column is the normalized seed.
    pub fn polynomial(seed: &DVector<f64>, capacity: usize, generator_iteration: usize) -> Result<Self> {
        let norm = seed.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Contract("Krylov seed must be nonzero and finite".into()));
        }
        if capacity == 0 {
            return Err(Error::Capacity { capacity });
        }
        Ok(Self {
            columns: vec![seed / norm],
            kind: SpaceKind::Polynomial,
            shifts: Vec::new(),
            generator_iteration,
            capacity,
            seed: seed.clone(),
            interval: None,
            ritz: Vec::new(),
            invariant: false,
        })
    }

    /// Empty rational basis; the first expansion solves with the seed.
    pub fn rational(seed: &DVector<f64>, capacity: usize, generator_iteration: usize) -> Result<Self> {
        let norm = seed.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Contract("Krylov seed must be nonzero and finite".into()));
        }
        Ok(Self {
            columns: Vec::new(),
            kind: SpaceKind::Rational,
            shifts: Vec::new(),
            generator_iteration,
            capacity,
            seed: seed.clone(),
            interval: None,
            ritz: Vec::new(),
            invariant: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[DVector<f64>] {
        &self.columns
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn generator_iteration(&self) -> usize {
        self.generator_iteration
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    pub fn spectral_interval(&self) -> Option<(f64, f64)> {
        self.interval
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        columns_matrix(&self.columns, self.seed.len())
    }

    /// `max |V^T V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.columns)
    }

    /// Records Ritz values of a projection, widening the running interval.
    pub fn observe_ritz(&mut self, values: &[f64]) {
        let (mut a, mut b) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if a > b {
            return;
        }
        if let Some((a0, b0)) = self.interval {
            a = a.min(a0);
            b = b.max(b0);
        }
        self.interval = Some((a, b));
        self.ritz = values.to_vec();
    }

    /// Appends the next Lanczos direction.
    pub fn poly_expand(&mut self, h: &SymMatrix) -> Result<Expansion> {
        if self.kind != SpaceKind::Polynomial {
            return Err(Error::Contract("poly_expand on a rational basis".into()));
        }
        if self.dim() >= self.capacity {
            return Err(Error::Capacity { capacity: self.capacity });
        }
        if self.invariant {
            return Ok(Expansion::Invariant);
        }
        let last = self.columns.last().expect("polynomial basis is seeded");
        let mut w = h.matvec(last);
        let scale = w.norm();
        let rest = orthogonalize(&self.columns, &mut w);
        if scale == 0.0 || rest <= BREAKDOWN_RTOL * scale {
            self.invariant = true;
            return Ok(Expansion::Invariant);
        }
        self.columns.push(w / rest);
        Ok(Expansion::Added)
    }

    /// Appends `(H + xi I)^{-1} v` with an adaptively chosen shift `xi`,
    /// where `v` is the seed for an empty basis and the last column otherwise.
    pub fn rational_expand(
        &mut self,
        h: &SymMatrix,
        spectral_interval: (f64, f64),
        solves: &mut FactorizationCounter,
    ) -> Result<Expansion> {
        let xi = next_shift(spectral_interval, &self.shifts, &self.ritz);
        self.rational_expand_with_shift(h, xi, solves)
    }

    pub fn rational_expand_with_shift(
        &mut self,
        h: &SymMatrix,
        shift: f64,
        solves: &mut FactorizationCounter,
    ) -> Result<Expansion> {
        if self.kind != SpaceKind::Rational {
            return Err(Error::Contract("rational_expand on a polynomial basis".into()));
        }
        if self.dim() >= self.capacity {
            return Err(Error::Capacity { capacity: self.capacity });
        }
        if !shift.is_finite() {
            return Err(Error::ShiftFailure { shift });
        }
        if self.invariant {
            return Ok(Expansion::Invariant);
        }
        let rhs = self.columns.last().cloned().unwrap_or_else(|| self.seed.clone());
        let mut used = shift;
        solves.bump();
        let factor = match h.factorize_shifted(shift) {
            Ok(f) => f,
            Err(Error::SingularShift { .. }) => {
                used = shift + 1e-8 * (1.0 + shift.abs());
                solves.bump();
                h.factorize_shifted(used).map_err(|_| Error::ShiftFailure { shift })?
            }
            Err(e) => return Err(e),
        };
        let mut w = factor.solve(&rhs);
        let scale = w.norm();
        if !scale.is_finite() {
            return Err(Error::ShiftFailure { shift: used });
        }
        let rest = orthogonalize(&self.columns, &mut w);
        if scale == 0.0 || rest <= BREAKDOWN_RTOL * scale {
            self.invariant = true;
            return Ok(Expansion::Invariant);
        }
        self.columns.push(w / rest);
        self.shifts.push(used);
        Ok(Expansion::Added)
    }
}

/// Greedy shift: maximize `prod |xi - xi_j| / prod |xi + theta_i|` over a
/// geometric grid of the interval, with the sign of the dominant part of the
/// spectrum so that `H + xi I` tends to stay away from singularity.
pub fn next_shift(interval: (f64, f64), previous: &[f64], ritz: &[f64]) -> f64 {
    let (a, b) = interval;
    let big = a.abs().max(b.abs());
    let sign = if b.abs() >= a.abs() { 1.0 } else { -1.0 };
    if big == 0.0 || !big.is_finite() {
        return 1.0;
    }
    if previous.is_empty() {
        return sign * big.sqrt();
    }
    let small = if a * b > 0.0 { a.abs().min(b.abs()) } else { 0.0 };
    let lo = small.max(1e-8 * big);
    let hi = big;
    let floor = 1e-3 * big;
    let ratio = (hi / lo).powf(1.0 / (SHIFT_CANDIDATES - 1) as f64);
    let mut best = (f64::NEG_INFINITY, sign * hi);
    let mut mag = lo;
    for _ in 0..SHIFT_CANDIDATES {
        let xi = sign * mag;
        let num: f64 = previous.iter().map(|&p| (xi - p).abs().max(1e-300).ln()).sum();
        let den: f64 = ritz.iter().map(|&t| (xi + t).abs().max(floor).ln()).sum();
        let score = num - den;
        if score > best.0 {
            best = (score, xi);
        }
        mag *= ratio;
    }
    best.1
}

/// Basis of `range([V, g])`.
#[derive(Clone, Debug)]
pub struct AugmentedBasis {
    pub w: Vec<DVector<f64>>,
    pub contains_gradient: bool,
    /// Whether a column was appended for the gradient.
    pub appended: bool,
}

impl AugmentedBasis {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn to_matrix(&self, n: usize) -> DMatrix<f64> {
        columns_matrix(&self.w, n)
    }

    /// `W y`.
    pub fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.w.first().map_or(0, |c| c.len());
        let mut out = DVector::zeros(n);
        for (c, yi) in self.w.iter().zip(y.iter()) {
            out.axpy(*yi, c, 1.0);
        }
        out
    }
}

/// `orth([V, g])`; the gradient column is skipped when already represented.
pub fn orth_augment(basis: &KrylovBasis, g: &DVector<f64>) -> Result<AugmentedBasis> {
    augment_columns(basis.columns(), g)
}

pub(crate) fn augment_columns(columns: &[DVector<f64>], g: &DVector<f64>) -> Result<AugmentedBasis> {
    let gn = g.norm();
    if !(gn > 0.0 && gn.is_finite()) {
        return Err(Error::Contract("gradient must be nonzero and finite".into()));
    }
    let mut r = g.clone();
    let rest = orthogonalize(columns, &mut r);
    let mut w = columns.to_vec();
    let appended = rest > BREAKDOWN_RTOL * gn;
    if appended {
        w.push(r / rest);
    }
    Ok(AugmentedBasis { w, contains_gradient: true, appended })
}

/// Projected problem `(W^T H W, W^T g)` with the products `H W` kept for reuse.
#[derive(Clone, Debug)]
pub struct Projection {
    pub h_r: DMatrix<f64>,
    pub g_r: DVector<f64>,
    pub hw: Vec<DVector<f64>>,
}

pub fn project(h: &SymMatrix, g: &DVector<f64>, w: &AugmentedBasis) -> Projection {
    let hw = w.w.iter().map(|c| h.matvec(c)).collect();
    project_with_products(g, w, hw)
}

/// Projection when the products `H w_i` are already available.
pub fn project_with_products(g: &DVector<f64>, w: &AugmentedBasis, hw: Vec<DVector<f64>>) -> Projection {
    let m = w.dim();
    let mut h_r = DMatrix::from_fn(m, m, |i, j| w.w[i].dot(&hw[j]));
    for i in 0..m {
        for j in (i + 1)..m {
            let avg = 0.5 * (h_r[(i, j)] + h_r[(j, i)]);
            h_r[(i, j)] = avg;
            h_r[(j, i)] = avg;
        }
    }
    let g_r = DVector::from_fn(m, |i, _| w.w[i].dot(g));
    Projection { h_r, g_r, hw }
}

fn columns_matrix(cols: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

pub(crate) fn orthonormality_error(cols: &[DVector<f64>]) -> f64 {
    let mut err = 0.0_f64;
    for i in 0..cols.len() {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((cols[i].dot(&cols[j]) - target).abs());
        }
    }
    err
}

/// `|(I - W W^T) g| / |g|`.
pub fn containment_residual(w: &[DVector<f64>], g: &DVector<f64>) -> f64 {
    let mut r = g.clone();
    for c in w {
        let d = c.dot(&r);
        r.axpy(-d, c, 1.0);
    }
    r.norm() / g.norm()
}
