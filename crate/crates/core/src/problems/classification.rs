//! Binary classification losses over sparse feature rows.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sprs::{CsMat, CsVecView, TriMat};

use super::{Objective, ObjectiveProblem};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{HessianBuilder, SymMatrix, DENSE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelSet {
    PlusMinusOne,
    ZeroOne,
}

impl LabelSet {
    pub fn contains(self, b: f64) -> bool {
        match self {
            LabelSet::PlusMinusOne => b == 1.0 || b == -1.0,
            LabelSet::ZeroOne => b == 0.0 || b == 1.0,
        }
    }
}

/// Training pairs `(a_i, b_i)` with the rows `a_i` stored in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationData {
    features: CsMat<f64>,
    labels: Vec<f64>,
    label_set: LabelSet,
}

impl ClassificationData {
    pub fn new(features: CsMat<f64>, labels: Vec<f64>, label_set: LabelSet) -> Result<Self> {
        let features = if features.is_csr() { features } else { features.to_csr() };
        if features.rows() != labels.len() {
            return Err(Error::Dimension { expected: features.rows(), got: labels.len() });
        }
        if let Some(b) = labels.iter().find(|&&b| !label_set.contains(b)) {
            return Err(Error::Contract(format!("label {b} is outside {label_set:?}")));
        }
        if features.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite feature value".into()));
        }
        Ok(Self { features, labels, label_set })
    }

    /// Builds from dense rows.
    pub fn from_dense_rows(rows: &[Vec<f64>], labels: Vec<f64>, label_set: LabelSet) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.len());
        let mut tri = TriMat::new((rows.len(), n));
        for (i, r) in rows.iter().enumerate() {
            crate::error::check_dim(n, r.len())?;
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    tri.add_triplet(i, j, v);
                }
            }
        }
        Self::new(tri.to_csr(), labels, label_set)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &CsMat<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label_set(&self) -> LabelSet {
        self.label_set
    }

    pub fn row(&self, i: usize) -> CsVecView<'_, f64> {
        self.features.outer_view(i).expect("row index in range")
    }

    /// Same samples with labels mapped between `{-1, 1}` and `{0, 1}`.
    pub fn relabel(&self, target: LabelSet) -> Self {
        let labels = self
            .labels
            .iter()
            .map(|&b| match (self.label_set, target) {
                (LabelSet::PlusMinusOne, LabelSet::ZeroOne) => (b + 1.0) / 2.0,
                (LabelSet::ZeroOne, LabelSet::PlusMinusOne) => 2.0 * b - 1.0,
                _ => b,
            })
            .collect();
        Self { features: self.features.clone(), labels, label_set: target }
    }

    fn margins(&self, x: &DVector<f64>, exec: Exec) -> Vec<f64> {
        let rows: Vec<usize> = (0..self.n_samples()).collect();
        exec.map(&rows, |&i| self.row(i).iter().map(|(j, &a)| a * x[j]).sum::<f64>())
    }

    /// `sum_i c_i a_i`.
    fn weighted_sum(&self, c: &[f64], exec: Exec) -> DVector<f64> {
        let n = self.n_features();
        exec.chunked_reduce(
            self.n_samples(),
            |r| {
                let mut acc = DVector::zeros(n);
                for i in r {
                    for (j, &a) in self.row(i).iter() {
                        acc[j] += c[i] * a;
                    }
                }
                acc
            },
            |a, b| a + b,
        )
        .unwrap_or_else(|| DVector::zeros(n))
    }

    /// `sum_i c_i a_i a_i^T + diag_shift I`.
    fn weighted_gram(&self, c: &[f64], diag_shift: f64, exec: Exec) -> SymMatrix {
        let n = self.n_features();
        if n > DENSE_LIMIT {
            let mut b = HessianBuilder::new(n);
            for i in 0..n {
                b.add(i, i, diag_shift);
            }
            for (i, &ci) in c.iter().enumerate() {
                let row: Vec<(usize, f64)> = self.row(i).iter().map(|(j, &a)| (j, a)).collect();
                for (p, &(j, aj)) in row.iter().enumerate() {
                    for &(k, ak) in &row[p..] {
                        b.add(j, k, ci * aj * ak);
                    }
                }
            }
            return b.finish();
        }
        let mut h = exec
            .chunked_reduce(
                self.n_samples(),
                |r| {
                    let mut acc = DMatrix::zeros(n, n);
                    for i in r {
                        let row = self.row(i);
                        for (k, &ak) in row.iter() {
                            let w = c[i] * ak;
                            for (j, &aj) in row.iter() {
                                acc[(j, k)] += w * aj;
                            }
                        }
                    }
                    acc
                },
                |a, b| a + b,
            )
            .unwrap_or_else(|| DMatrix::zeros(n, n));
        for i in 0..n {
            h[(i, i)] += diag_shift;
        }
        SymMatrix::from_dense(h)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-t))` without overflow.
fn softplus_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// `(1/N) sum log(1 + exp(-b_i a_i^T x)) + |x|^2 / (2N)`.
#[derive(Debug)]
pub struct Logistic {
    name: String,
    data: Arc<ClassificationData>,
    exec: Exec,
}

impl Logistic {
    pub fn new(name: impl Into<String>, data: Arc<ClassificationData>, exec: Exec) -> Result<Self> {
        if data.label_set() != LabelSet::PlusMinusOne {
            return Err(Error::Contract("logistic loss needs labels in {-1, +1}".into()));
        }
        Ok(Self { name: name.into(), data, exec })
    }
}

impl Objective for Logistic {
    fn name(&self) -> &str {
        &self.name
    }

    fn n(&self) -> usize {
        self.data.n_features()
    }

    fn x0(&self) -> DVector<f64> {
        DVector::zeros(self.n())
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let big_n = self.data.n_samples() as f64;
        let z = self.data.margins(x, self.exec);
        let loss: f64 = z.iter().zip(self.data.labels()).map(|(&z, &b)| softplus_neg(b * z)).sum();
        loss / big_n + x.norm_squared() / (2.0 * big_n)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let big_n = self.data.n_samples() as f64;
        let z = self.data.margins(x, self.exec);
        let c: Vec<f64> =
            z.iter().zip(self.data.labels()).map(|(&z, &b)| -b * sigmoid(-b * z) / big_n).collect();
        self.data.weighted_sum(&c, self.exec) + x / big_n
    }

    fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
        let big_n = self.data.n_samples() as f64;
        let z = self.data.margins(x, self.exec);
        let c: Vec<f64> = z
            .iter()
            .zip(self.data.labels())
            .map(|(&z, &b)| {
                let p = sigmoid(b * z);
                p * (1.0 - p) / big_n
            })
            .collect();
        self.data.weighted_gram(&c, 1.0 / big_n, self.exec)
    }
}

/// `(1/N) sum (b_i - 1 / (1 + exp(-a_i^T x)))^2`.
#[derive(Debug)]
pub struct Sigmoid {
    name: String,
    data: Arc<ClassificationData>,
    exec: Exec,
}

impl Sigmoid {
    pub fn new(name: impl Into<String>, data: Arc<ClassificationData>, exec: Exec) -> Result<Self> {
        if data.label_set() != LabelSet::ZeroOne {
            return Err(Error::Contract("sigmoid loss needs labels in {0, 1}".into()));
        }
        Ok(Self { name: name.into(), data, exec })
    }
}

impl Objective for Sigmoid {
    fn name(&self) -> &str {
        &self.name
    }

    fn n(&self) -> usize {
        self.data.n_features()
    }

    fn x0(&self) -> DVector<f64> {
        DVector::zeros(self.n())
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let z = self.data.margins(x, self.exec);
        let s: f64 = z.iter().zip(self.data.labels()).map(|(&z, &b)| (b - sigmoid(z)).powi(2)).sum();
        s / self.data.n_samples() as f64
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let big_n = self.data.n_samples() as f64;
        let z = self.data.margins(x, self.exec);
        let c: Vec<f64> = z
            .iter()
            .zip(self.data.labels())
            .map(|(&z, &b)| {
                let p = sigmoid(z);
                -2.0 * (b - p) * p * (1.0 - p) / big_n
            })
            .collect();
        self.data.weighted_sum(&c, self.exec)
    }

    fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
        let big_n = self.data.n_samples() as f64;
        let z = self.data.margins(x, self.exec);
        let c: Vec<f64> = z
            .iter()
            .zip(self.data.labels())
            .map(|(&z, &b)| {
                let p = sigmoid(z);
                let d1 = p * (1.0 - p);
                let d2 = d1 * (1.0 - 2.0 * p);
                2.0 * (d1 * d1 - (b - p) * d2) / big_n
            })
            .collect();
        self.data.weighted_gram(&c, 0.0, self.exec)
    }
}

pub fn logistic_objective(data: Arc<ClassificationData>, exec: Exec) -> Result<ObjectiveProblem> {
    let name = format!("LOGISTIC-{}x{}", data.n_samples(), data.n_features());
    Ok(ObjectiveProblem::new(Arc::new(Logistic::new(name, data, exec)?)))
}

pub fn sigmoid_objective(data: Arc<ClassificationData>, exec: Exec) -> Result<ObjectiveProblem> {
    let name = format!("SIGMOID-{}x{}", data.n_samples(), data.n_features());
    Ok(ObjectiveProblem::new(Arc::new(Sigmoid::new(name, data, exec)?)))
}

/// Standard-normal features, labels `sign(a^T w)` from a planted separator
/// `w`, and 10% of the labels flipped. Labels are in `{-1, +1}`.
pub fn synth_classification(n_samples: usize, n_features: usize, seed: u64) -> Result<ClassificationData> {
    if n_samples == 0 || n_features == 0 {
        return Err(Error::Contract("need at least one sample and one feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n_features).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let a: Vec<f64> = (0..n_features).map(|_| rng.sample(StandardNormal)).collect();
        let margin: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
        let mut b = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < 0.1 {
            b = -b;
        }
        rows.push(a);
        labels.push(b);
    }
    ClassificationData::from_dense_rows(&rows, labels, LabelSet::PlusMinusOne)
}
