//! Symmetric indefinite factorizations `P A P^T = L D L^T`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use sprs_ldl::LdlNumeric;

/// A pivot is treated as zero below this fraction of the largest entry.
pub(crate) const ZERO_PIVOT_RTOL: f64 = 1e-14;

/// Bunch-Kaufman growth constant `(1 + sqrt(17)) / 8`.
const ALPHA: f64 = 0.640_388_203_202_208_4;

/// Eigenvalue sign counts of a factorized matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn is_positive_definite(&self) -> bool {
        self.negative == 0 && self.zero == 0
    }
}

#[derive(Clone, Copy, Debug)]
enum Block {
    One(usize),
    Two(usize),
}

/// Dense Bunch-Kaufman factorization with partial (diagonal) pivoting.
#[derive(Clone, Debug)]
pub struct BunchKaufman {
    // L below the block diagonal, D on it
    lu: DMatrix<f64>,
    perm: Vec<usize>,
    blocks: Vec<Block>,
}

impl BunchKaufman {
    /// Factorizes a symmetric matrix; `None` when a pivot is numerically zero.
    pub fn factor(mut a: DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = ZERO_PIVOT_RTOL * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        let mut k = 0;
        while k < n {
            let absakk = a[(k, k)].abs();
            let (imax, colmax) = ((k + 1)..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, 0.0), |best, c| if c.1 > best.1 { c } else { best });
            if absakk.max(colmax) <= tol || !absakk.is_finite() {
                return None;
            }
            let (kp, two) = if absakk >= ALPHA * colmax {
                (k, false)
            } else {
                let rowmax = (k..n)
                    .filter(|&j| j != imax)
                    .map(|j| a[(imax, j)].abs())
                    .fold(0.0, f64::max);
                if absakk * rowmax >= ALPHA * colmax * colmax {
                    (k, false)
                } else if a[(imax, imax)].abs() >= ALPHA * rowmax {
                    (imax, false)
                } else {
                    (imax, true)
                }
            };
            let kk = if two { k + 1 } else { k };
            if kp != kk {
                a.swap_rows(kk, kp);
                // columns only within the trailing block; earlier columns hold L
                for i in k..n {
                    a.swap((i, kk), (i, kp));
                }
                perm.swap(kk, kp);
            }
            if !two {
                let d = a[(k, k)];
                if d.abs() <= tol {
                    return None;
                }
                for j in (k + 1)..n {
                    let ajk = a[(j, k)];
                    if ajk == 0.0 {
                        continue;
                    }
                    let lj = ajk / d;
                    for i in j..n {
                        let upd = a[(i, k)] * lj;
                        a[(i, j)] -= upd;
                    }
                }
                for i in (k + 1)..n {
                    a[(i, k)] /= d;
                }
                for j in (k + 1)..n {
                    for i in (j + 1)..n {
                        a[(j, i)] = a[(i, j)];
                    }
                }
                blocks.push(Block::One(k));
                k += 1;
            } else {
                let d11 = a[(k, k)];
                let d21 = a[(k + 1, k)];
                let d22 = a[(k + 1, k + 1)];
                let det = d11 * d22 - d21 * d21;
                let (e1, e2) = sym2_eigs(d11, d21, d22);
                if e1.abs() <= tol || e2.abs() <= tol || det == 0.0 {
                    return None;
                }
                // rows of W D^{-1}
                for i in (k + 2)..n {
                    let w1 = a[(i, k)];
                    let w2 = a[(i, k + 1)];
                    let l1 = (d22 * w1 - d21 * w2) / det;
                    let l2 = (d11 * w2 - d21 * w1) / det;
                    for j in (k + 2)..=i {
                        let upd = l1 * a[(j, k)] + l2 * a[(j, k + 1)];
                        a[(i, j)] -= upd;
                    }
                    // stash the multipliers after the row update uses the raw column
                    a[(k, i)] = l1;
                    a[(k + 1, i)] = l2;
                }
                for i in (k + 2)..n {
                    a[(i, k)] = a[(k, i)];
                    a[(i, k + 1)] = a[(k + 1, i)];
                }
                for j in (k + 2)..n {
                    for i in (j + 1)..n {
                        a[(j, i)] = a[(i, j)];
                    }
                }
                blocks.push(Block::Two(k));
                k += 2;
            }
        }
        Some(Self { lu: a, perm, blocks })
    }

    pub fn n(&self) -> usize {
        self.lu.nrows()
    }

    pub fn inertia(&self) -> Inertia {
        let mut out = Inertia::default();
        let mut count = |v: f64| {
            if v > 0.0 {
                out.positive += 1
            } else if v < 0.0 {
                out.negative += 1
            } else {
                out.zero += 1
            }
        };
        for b in &self.blocks {
            match *b {
                Block::One(k) => count(self.lu[(k, k)]),
                Block::Two(k) => {
                    let (e1, e2) =
                        sym2_eigs(self.lu[(k, k)], self.lu[(k + 1, k)], self.lu[(k + 1, k + 1)]);
                    count(e1);
                    count(e2);
                }
            }
        }
        out
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let lu = &self.lu;
        let mut x = DVector::from_fn(n, |i, _| rhs[self.perm[i]]);
        // forward with unit L
        for b in &self.blocks {
            match *b {
                Block::One(k) => {
                    let xk = x[k];
                    for i in (k + 1)..n {
                        x[i] -= lu[(i, k)] * xk;
                    }
                }
                Block::Two(k) => {
                    let (x1, x2) = (x[k], x[k + 1]);
                    for i in (k + 2)..n {
                        x[i] -= lu[(i, k)] * x1 + lu[(i, k + 1)] * x2;
                    }
                }
            }
        }
        for b in &self.blocks {
            match *b {
                Block::One(k) => x[k] /= lu[(k, k)],
                Block::Two(k) => {
                    let (d11, d21, d22) = (lu[(k, k)], lu[(k + 1, k)], lu[(k + 1, k + 1)]);
                    let det = d11 * d22 - d21 * d21;
                    let (y1, y2) = (x[k], x[k + 1]);
                    x[k] = (d22 * y1 - d21 * y2) / det;
                    x[k + 1] = (d11 * y2 - d21 * y1) / det;
                }
            }
        }
        for b in self.blocks.iter().rev() {
            match *b {
                Block::One(k) => {
                    let mut acc = 0.0;
                    for i in (k + 1)..n {
                        acc += lu[(i, k)] * x[i];
                    }
                    x[k] -= acc;
                }
                Block::Two(k) => {
                    let (mut a1, mut a2) = (0.0, 0.0);
                    for i in (k + 2)..n {
                        a1 += lu[(i, k)] * x[i];
                        a2 += lu[(i, k + 1)] * x[i];
                    }
                    x[k] -= a1;
                    x[k + 1] -= a2;
                }
            }
        }
        let mut out = DVector::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        out
    }
}

fn sym2_eigs(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    (mean - r, mean + r)
}

/// A factorization of `H + lambda I` in either storage layout.
pub enum ShiftedFactor {
    /// Positive definite fast path.
    Cholesky(Cholesky<f64, Dyn>),
    Dense(BunchKaufman),
    Sparse(Box<LdlNumeric<f64, usize>>),
}

impl std::fmt::Debug for ShiftedFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShiftedFactor::Cholesky(c) => f.debug_tuple("Cholesky").field(&c.l_dirty().nrows()).finish(),
            ShiftedFactor::Dense(bk) => f.debug_tuple("Dense").field(&bk.n()).finish(),
            ShiftedFactor::Sparse(l) => f.debug_tuple("Sparse").field(&l.problem_size()).finish(),
        }
    }
}

impl ShiftedFactor {
    /// Dense factorization: Cholesky when it succeeds with nonzero pivots,
    /// Bunch-Kaufman otherwise.
    pub fn dense(a: DMatrix<f64>) -> Option<Self> {
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = ZERO_PIVOT_RTOL * scale;
        if (0..a.nrows()).all(|i| a[(i, i)] > tol) {
            if let Some(c) = Cholesky::new(a.clone()) {
                let l = c.l_dirty();
                if (0..l.nrows()).all(|i| l[(i, i)] * l[(i, i)] > tol) {
                    return Some(ShiftedFactor::Cholesky(c));
                }
            }
        }
        BunchKaufman::factor(a).map(ShiftedFactor::Dense)
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            ShiftedFactor::Cholesky(c) => c.solve(rhs),
            ShiftedFactor::Dense(bk) => bk.solve(rhs),
            ShiftedFactor::Sparse(l) => {
                let x: Vec<f64> = l.solve(rhs.as_slice());
                DVector::from_vec(x)
            }
        }
    }

    pub fn inertia(&self) -> Inertia {
        match self {
            ShiftedFactor::Cholesky(c) => {
                Inertia { positive: c.l_dirty().nrows(), negative: 0, zero: 0 }
            }
            ShiftedFactor::Dense(bk) => bk.inertia(),
            ShiftedFactor::Sparse(l) => {
                let mut out = Inertia::default();
                for &d in l.d() {
                    if d > 0.0 {
                        out.positive += 1;
                    } else if d < 0.0 {
                        out.negative += 1;
                    } else {
                        out.zero += 1;
                    }
                }
                out
            }
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.inertia().is_positive_definite()
    }
}
