//! Symmetric matrix storage and the shifted factorizations built on it.
//!
//! Hessians up to [`DENSE_LIMIT`] rows are held densely; larger ones use a
//! compressed sparse column layout that stores both triangles and every
//! diagonal entry, so that `H + lambda I` keeps the same sparsity pattern for
//! any shift and the symbolic analysis can be reused.

mod ldlt;

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlSymbolic};

pub use ldlt::{BunchKaufman, Inertia, ShiftedFactor};

/// Largest dimension stored densely.
pub const DENSE_LIMIT: usize = 2000;

/// Symmetric matrix, dense or sparse.
#[derive(Clone, Debug)]
pub enum SymMatrix {
    Dense(DMatrix<f64>),
    Sparse(SparseSym),
}

/// Sparse symmetric matrix in CSC form with both triangles stored.
#[derive(Clone, Debug)]
pub struct SparseSym {
    mat: CsMat<f64>,
    diag_pos: Vec<usize>,
    symbolic: Arc<OnceLock<LdlSymbolic<usize>>>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets of the full matrix; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut tri = TriMat::new((n, n));
        for i in 0..n {
            tri.add_triplet(i, i, 0.0);
        }
        for &(i, j, v) in triplets {
            tri.add_triplet(i, j, v);
        }
        let raw: CsMat<f64> = tri.to_csc();
        // symmetrize: (A + A^T) / 2
        let t = raw.transpose_view().to_csc();
        let mut tri = TriMat::new((n, n));
        for (v, (i, j)) in raw.iter() {
            tri.add_triplet(i, j, 0.5 * v);
        }
        for (v, (i, j)) in t.iter() {
            tri.add_triplet(i, j, 0.5 * v);
        }
        let mat: CsMat<f64> = tri.to_csc();
        let diag_pos = Self::locate_diagonal(&mat);
        Self { mat, diag_pos, symbolic: Arc::new(OnceLock::new()) }
    }

    fn locate_diagonal(mat: &CsMat<f64>) -> Vec<usize> {
        let indptr = mat.indptr();
        let indptr = indptr.raw_storage();
        let indices = mat.indices();
        (0..mat.cols())
            .map(|j| {
                let range = indptr[j]..indptr[j + 1];
                let off = indices[range.clone()]
                    .iter()
                    .position(|&i| i == j)
                    .expect("diagonal entries are always stored");
                range.start + off
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.mat.rows()
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    pub fn csc(&self) -> &CsMat<f64> {
        &self.mat
    }

    fn shifted(&self, lambda: f64) -> CsMat<f64> {
        let mut m = self.mat.clone();
        {
            let data = m.data_mut();
            for &p in &self.diag_pos {
                data[p] += lambda;
            }
        }
        m
    }

    fn symbolic(&self) -> &LdlSymbolic<usize> {
        self.symbolic.get_or_init(|| {
            Ldl::new()
                .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
                .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
                .symbolic(self.mat.view())
        })
    }
}

impl SymMatrix {
    /// Wraps a dense matrix, replacing it by `(H + H^T) / 2`.
    pub fn from_dense(mut h: DMatrix<f64>) -> Self {
        assert!(h.is_square(), "symmetric matrix must be square");
        let n = h.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let avg = 0.5 * (h[(i, j)] + h[(j, i)]);
                h[(i, j)] = avg;
                h[(j, i)] = avg;
            }
        }
        SymMatrix::Dense(h)
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix::Dense(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix::Dense(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix::Dense(DMatrix::zeros(n, n))
    }

    pub fn n(&self) -> usize {
        match self {
            SymMatrix::Dense(h) => h.nrows(),
            SymMatrix::Sparse(s) => s.n(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, SymMatrix::Sparse(_))
    }

    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            SymMatrix::Dense(h) => h * v,
            SymMatrix::Sparse(s) => {
                let mut out = DVector::zeros(s.n());
                for (col, vec) in s.mat.outer_iterator().enumerate() {
                    let vj = v[col];
                    if vj == 0.0 {
                        continue;
                    }
                    for (row, &a) in vec.iter() {
                        out[row] += a * vj;
                    }
                }
                out
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            SymMatrix::Dense(h) => h[(i, j)],
            SymMatrix::Sparse(s) => s.mat.get(i, j).copied().unwrap_or(0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            SymMatrix::Dense(h) => (0..h.nrows()).map(|i| h[(i, i)]).collect(),
            SymMatrix::Sparse(s) => s.diag_pos.iter().map(|&p| s.mat.data()[p]).collect(),
        }
    }

    /// Gershgorin lower bound on the smallest eigenvalue.
    pub fn gershgorin_lower(&self) -> f64 {
        let n = self.n();
        let mut radius = vec![0.0; n];
        let diag = self.diagonal();
        match self {
            SymMatrix::Dense(h) => {
                for j in 0..n {
                    for i in 0..n {
                        if i != j {
                            radius[i] += h[(i, j)].abs();
                        }
                    }
                }
            }
            SymMatrix::Sparse(s) => {
                for (v, (i, j)) in s.mat.iter() {
                    if i != j {
                        radius[i] += v.abs();
                    }
                }
            }
        }
        diag.iter()
            .zip(&radius)
            .map(|(d, r)| d - r)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            SymMatrix::Dense(h) => h.iter().fold(0.0, |m, v| m.max(v.abs())),
            SymMatrix::Sparse(s) => s.mat.data().iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(h) => h.clone(),
            SymMatrix::Sparse(s) => {
                let n = s.n();
                let mut d = DMatrix::zeros(n, n);
                for (v, (i, j)) in s.mat.iter() {
                    d[(i, j)] = *v;
                }
                d
            }
        }
    }

    /// Factorizes `H + lambda I` with a symmetric indefinite LDL^T.
    pub fn factorize_shifted(&self, lambda: f64) -> crate::Result<ShiftedFactor> {
        match self {
            SymMatrix::Dense(h) => {
                let mut a = h.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += lambda;
                }
                ShiftedFactor::dense(a).ok_or(crate::Error::SingularShift { lambda })
            }
            SymMatrix::Sparse(s) => {
                let shifted = s.shifted(lambda);
                let tol = ldlt::ZERO_PIVOT_RTOL
                    * shifted.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let numeric = s
                    .symbolic()
                    .clone()
                    .factor(shifted.view())
                    .map_err(|_| crate::Error::SingularShift { lambda })?;
                if numeric.d().iter().any(|d| d.abs() <= tol || !d.is_finite()) {
                    return Err(crate::Error::SingularShift { lambda });
                }
                Ok(ShiftedFactor::Sparse(Box::new(numeric)))
            }
        }
    }
}

/// Accumulates Hessian entries and picks the dense or sparse layout by size.
pub struct HessianBuilder {
    n: usize,
    dense: Option<DMatrix<f64>>,
    triplets: Vec<(usize, usize, f64)>,
}

impl HessianBuilder {
    pub fn new(n: usize) -> Self {
        Self::with_dense_limit(n, DENSE_LIMIT)
    }

    pub fn with_dense_limit(n: usize, limit: usize) -> Self {
        if n <= limit {
            Self { n, dense: Some(DMatrix::zeros(n, n)), triplets: Vec::new() }
        } else {
            Self { n, dense: None, triplets: Vec::new() }
        }
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`; each unordered pair is given once.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        match &mut self.dense {
            Some(d) => {
                d[(i, j)] += v;
                if i != j {
                    d[(j, i)] += v;
                }
            }
            None => {
                self.triplets.push((i, j, v));
                if i != j {
                    self.triplets.push((j, i, v));
                }
            }
        }
    }

    pub fn finish(self) -> SymMatrix {
        match self.dense {
            Some(d) => SymMatrix::Dense(d),
            None => SymMatrix::Sparse(SparseSym::from_triplets(self.n, &self.triplets)),
        }
    }
}

/// Orthogonalizes `v` against the orthonormal columns `basis` with two
/// classical Gram-Schmidt passes; returns the remaining norm.
pub(crate) fn orthogonalize(basis: &[DVector<f64>], v: &mut DVector<f64>) -> f64 {
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|q| q.dot(v)).collect();
        for (q, c) in basis.iter().zip(coeffs) {
            v.axpy(-c, q, 1.0);
        }
    }
    v.norm()
}
