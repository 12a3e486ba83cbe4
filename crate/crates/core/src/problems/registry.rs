//! Analytic unconstrained test problems in their usual CUTEst form.
//!
//! Each objective is a weighted sum of terms `w * phi(r(x))` with a scalar
//! outer function `phi` and an inner function `r` whose gradient and Hessian
//! are sparse. Values, gradients, and Hessians are all assembled from the
//! same term list.

use nalgebra::DVector;

use super::Objective;
use crate::error::{Error, Result};
use crate::linalg::{HessianBuilder, SymMatrix, DENSE_LIMIT};
use crate::problems::ObjectiveProblem;

#[derive(Clone, Copy, Debug)]
enum Outer {
    Lin,
    Sq,
    Quart,
    Sin,
    Cos,
}

impl Outer {
    fn eval(self, r: f64) -> (f64, f64, f64) {
        match self {
            Outer::Lin => (r, 1.0, 0.0),
            Outer::Sq => (r * r, 2.0 * r, 2.0),
            Outer::Quart => (r.powi(4), 4.0 * r.powi(3), 12.0 * r * r),
            Outer::Sin => (r.sin(), r.cos(), -r.sin()),
            Outer::Cos => (r.cos(), -r.sin(), -r.cos()),
        }
    }
}

trait Sink {
    fn term(&mut self, outer: Outer, w: f64, r: f64, dr: &[(usize, f64)], d2r: &[(usize, usize, f64)]);
}

struct ValueSink(f64);

impl Sink for ValueSink {
    fn term(&mut self, outer: Outer, w: f64, r: f64, _: &[(usize, f64)], _: &[(usize, usize, f64)]) {
        self.0 += w * outer.eval(r).0;
    }
}

struct GradSink(DVector<f64>);

impl Sink for GradSink {
    fn term(&mut self, outer: Outer, w: f64, r: f64, dr: &[(usize, f64)], _: &[(usize, usize, f64)]) {
        let d1 = w * outer.eval(r).1;
        for &(i, v) in dr {
            self.0[i] += d1 * v;
        }
    }
}

struct HessSink(HessianBuilder);

impl Sink for HessSink {
    fn term(&mut self, outer: Outer, w: f64, r: f64, dr: &[(usize, f64)], d2r: &[(usize, usize, f64)]) {
        let (_, d1, d2) = outer.eval(r);
        for (a, &(i, vi)) in dr.iter().enumerate() {
            for &(j, vj) in &dr[a..] {
                self.0.add(i, j, w * d2 * vi * vj);
            }
        }
        for &(i, j, v) in d2r {
            self.0.add(i, j, w * d1 * v);
        }
    }
}

type Terms = fn(&[f64], &mut dyn Sink);

/// One named problem family.
#[derive(Clone, Copy)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub admits: fn(usize) -> std::result::Result<(), &'static str>,
    start: fn(usize) -> Vec<f64>,
    terms: Terms,
}

impl std::fmt::Debug for RegistryEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegistryEntry").field("name", &self.name).finish()
    }
}

#[derive(Debug)]
struct Analytic {
    name: String,
    n: usize,
    x0: Vec<f64>,
    terms: Terms,
}

impl Objective for Analytic {
    fn name(&self) -> &str {
        &self.name
    }

    fn n(&self) -> usize {
        self.n
    }

    fn x0(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x0)
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let mut s = ValueSink(0.0);
        (self.terms)(x.as_slice(), &mut s);
        s.0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut s = GradSink(DVector::zeros(self.n));
        (self.terms)(x.as_slice(), &mut s);
        s.0
    }

    fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
        let mut s = HessSink(HessianBuilder::new(self.n));
        (self.terms)(x.as_slice(), &mut s);
        s.0.finish()
    }
}

fn at_least(min: usize) -> impl Fn(usize) -> std::result::Result<(), &'static str> {
    move |n| if n >= min { Ok(()) } else { Err("dimension too small") }
}

fn any_n(n: usize) -> std::result::Result<(), &'static str> {
    at_least(1)(n)
}

fn two_plus(n: usize) -> std::result::Result<(), &'static str> {
    at_least(2)(n)
}

fn three_plus(n: usize) -> std::result::Result<(), &'static str> {
    at_least(3)(n)
}

fn only_two(n: usize) -> std::result::Result<(), &'static str> {
    if n == 2 { Ok(()) } else { Err("defined for n = 2 only") }
}

fn blocks_of_four(n: usize) -> std::result::Result<(), &'static str> {
    if n >= 4 && n.is_multiple_of(4) { Ok(()) } else { Err("n must be a positive multiple of 4") }
}

fn dense_only(n: usize) -> std::result::Result<(), &'static str> {
    if (1..=DENSE_LIMIT).contains(&n) { Ok(()) } else { Err("Hessian is dense; n must not exceed 2000") }
}

fn alternating(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i % 2 == 0 { -1.2 } else { 1.0 }).collect()
}

fn rosenbr(x: &[f64], s: &mut dyn Sink) {
    for i in 0..x.len() - 1 {
        s.term(Outer::Sq, 100.0, x[i + 1] - x[i] * x[i], &[(i, -2.0 * x[i]), (i + 1, 1.0)], &[(i, i, -2.0)]);
        s.term(Outer::Sq, 1.0, 1.0 - x[i], &[(i, -1.0)], &[]);
    }
}

fn arwhead(x: &[f64], s: &mut dyn Sink) {
    let n = x.len() - 1;
    for i in 0..n {
        s.term(Outer::Lin, 1.0, -4.0 * x[i] + 3.0, &[(i, -4.0)], &[]);
        let q = x[i] * x[i] + x[n] * x[n];
        s.term(Outer::Sq, 1.0, q, &[(i, 2.0 * x[i]), (n, 2.0 * x[n])], &[(i, i, 2.0), (n, n, 2.0)]);
    }
}

fn bdarwhd(x: &[f64], s: &mut dyn Sink) {
    let n = x.len() - 1;
    for i in 0..n {
        s.term(Outer::Sq, 1.0, -4.0 * x[i] + 3.0, &[(i, -4.0)], &[]);
        let q = x[i] * x[i] + x[n] * x[n];
        s.term(Outer::Sq, 1.0, q, &[(i, 2.0 * x[i]), (n, 2.0 * x[n])], &[(i, i, 2.0), (n, n, 2.0)]);
    }
}

fn dqrtic(x: &[f64], s: &mut dyn Sink) {
    for (i, &xi) in x.iter().enumerate() {
        s.term(Outer::Quart, 1.0, xi - (i + 1) as f64, &[(i, 1.0)], &[]);
    }
}

fn tridia(x: &[f64], s: &mut dyn Sink) {
    s.term(Outer::Sq, 1.0, x[0] - 1.0, &[(0, 1.0)], &[]);
    for i in 1..x.len() {
        s.term(Outer::Sq, (i + 1) as f64, 2.0 * x[i] - x[i - 1], &[(i, 2.0), (i - 1, -1.0)], &[]);
    }
}

fn engval1(x: &[f64], s: &mut dyn Sink) {
    for i in 0..x.len() - 1 {
        let q = x[i] * x[i] + x[i + 1] * x[i + 1];
        s.term(
            Outer::Sq,
            1.0,
            q,
            &[(i, 2.0 * x[i]), (i + 1, 2.0 * x[i + 1])],
            &[(i, i, 2.0), (i + 1, i + 1, 2.0)],
        );
        s.term(Outer::Lin, 1.0, -4.0 * x[i] + 3.0, &[(i, -4.0)], &[]);
    }
}

fn nondia(x: &[f64], s: &mut dyn Sink) {
    s.term(Outer::Sq, 1.0, x[0] - 1.0, &[(0, 1.0)], &[]);
    for j in 0..x.len() - 1 {
        let r = x[0] - x[j] * x[j];
        if j == 0 {
            s.term(Outer::Sq, 100.0, r, &[(0, 1.0 - 2.0 * x[0])], &[(0, 0, -2.0)]);
        } else {
            s.term(Outer::Sq, 100.0, r, &[(0, 1.0), (j, -2.0 * x[j])], &[(j, j, -2.0)]);
        }
    }
}

fn woods(x: &[f64], s: &mut dyn Sink) {
    for b in (0..x.len()).step_by(4) {
        let (i1, i2, i3, i4) = (b, b + 1, b + 2, b + 3);
        let (x1, x2, x3, x4) = (x[i1], x[i2], x[i3], x[i4]);
        s.term(Outer::Sq, 100.0, x2 - x1 * x1, &[(i1, -2.0 * x1), (i2, 1.0)], &[(i1, i1, -2.0)]);
        s.term(Outer::Sq, 1.0, 1.0 - x1, &[(i1, -1.0)], &[]);
        s.term(Outer::Sq, 90.0, x4 - x3 * x3, &[(i3, -2.0 * x3), (i4, 1.0)], &[(i3, i3, -2.0)]);
        s.term(Outer::Sq, 1.0, 1.0 - x3, &[(i3, -1.0)], &[]);
        s.term(Outer::Sq, 10.1, x2 - 1.0, &[(i2, 1.0)], &[]);
        s.term(Outer::Sq, 10.1, x4 - 1.0, &[(i4, 1.0)], &[]);
        s.term(Outer::Lin, 19.8, (x2 - 1.0) * (x4 - 1.0), &[(i2, x4 - 1.0), (i4, x2 - 1.0)], &[(i2, i4, 1.0)]);
    }
}

fn powellsg(x: &[f64], s: &mut dyn Sink) {
    for b in (0..x.len()).step_by(4) {
        let (i1, i2, i3, i4) = (b, b + 1, b + 2, b + 3);
        s.term(Outer::Sq, 1.0, x[i1] + 10.0 * x[i2], &[(i1, 1.0), (i2, 10.0)], &[]);
        s.term(Outer::Sq, 5.0, x[i3] - x[i4], &[(i3, 1.0), (i4, -1.0)], &[]);
        s.term(Outer::Quart, 1.0, x[i2] - 2.0 * x[i3], &[(i2, 1.0), (i3, -2.0)], &[]);
        s.term(Outer::Quart, 10.0, x[i1] - x[i4], &[(i1, 1.0), (i4, -1.0)], &[]);
    }
}

fn edensch(x: &[f64], s: &mut dyn Sink) {
    s.term(Outer::Lin, 16.0, 1.0, &[], &[]);
    for i in 0..x.len() - 1 {
        s.term(Outer::Quart, 1.0, x[i] - 2.0, &[(i, 1.0)], &[]);
        s.term(
            Outer::Sq,
            1.0,
            x[i] * x[i + 1] - 2.0 * x[i + 1],
            &[(i, x[i + 1]), (i + 1, x[i] - 2.0)],
            &[(i, i + 1, 1.0)],
        );
        s.term(Outer::Sq, 1.0, x[i + 1] + 1.0, &[(i + 1, 1.0)], &[]);
    }
}

fn cube(x: &[f64], s: &mut dyn Sink) {
    s.term(Outer::Sq, 1.0, x[0] - 1.0, &[(0, 1.0)], &[]);
    for i in 1..x.len() {
        let p = x[i - 1];
        s.term(Outer::Sq, 100.0, x[i] - p * p * p, &[(i, 1.0), (i - 1, -3.0 * p * p)], &[(i - 1, i - 1, -6.0 * p)]);
    }
}

fn eg2(x: &[f64], s: &mut dyn Sink) {
    let n = x.len() - 1;
    for i in 0..n {
        let r = x[0] + x[i] * x[i] - 1.0;
        if i == 0 {
            s.term(Outer::Sin, 1.0, r, &[(0, 1.0 + 2.0 * x[0])], &[(0, 0, 2.0)]);
        } else {
            s.term(Outer::Sin, 1.0, r, &[(0, 1.0), (i, 2.0 * x[i])], &[(i, i, 2.0)]);
        }
    }
    s.term(Outer::Sin, 0.5, x[n] * x[n], &[(n, 2.0 * x[n])], &[(n, n, 2.0)]);
}

fn hilbert(x: &[f64], s: &mut dyn Sink) {
    let n = x.len();
    for i in 0..n {
        s.term(Outer::Lin, 0.5 / (2 * i + 1) as f64, x[i] * x[i], &[(i, 2.0 * x[i])], &[(i, i, 2.0)]);
        for j in (i + 1)..n {
            s.term(Outer::Lin, 1.0 / (i + j + 1) as f64, x[i] * x[j], &[(i, x[j]), (j, x[i])], &[(i, j, 1.0)]);
        }
    }
}

fn indef(x: &[f64], s: &mut dyn Sink) {
    let n = x.len();
    for (i, &xi) in x.iter().enumerate() {
        s.term(Outer::Lin, 1.0, xi, &[(i, 1.0)], &[]);
    }
    for i in 1..n - 1 {
        let r = 2.0 * x[i] - x[n - 1] - x[0];
        s.term(Outer::Cos, 0.5, r, &[(i, 2.0), (n - 1, -1.0), (0, -1.0)], &[]);
    }
}

fn quadratic(x: &[f64], s: &mut dyn Sink) {
    for (i, &xi) in x.iter().enumerate() {
        s.term(Outer::Sq, 0.5 * (i + 1) as f64, xi, &[(i, 1.0)], &[]);
    }
}

static ENTRIES: &[RegistryEntry] = &[
    RegistryEntry {
        name: "ROSENBR",
        formula: "sum_{i<n} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2; x0 = (-1.2, 1, -1.2, ...)",
        admits: two_plus,
        start: alternating,
        terms: rosenbr,
    },
    RegistryEntry {
        name: "ROSENBROCK",
        formula: "100 (x2 - x1^2)^2 + (1 - x1)^2; x0 = (-1.2, 1)",
        admits: only_two,
        start: alternating,
        terms: rosenbr,
    },
    RegistryEntry {
        name: "ARWHEAD",
        formula: "sum_{i<n} (-4 x_i + 3) + (x_i^2 + x_n^2)^2; x0 = 1",
        admits: two_plus,
        start: |n| vec![1.0; n],
        terms: arwhead,
    },
    RegistryEntry {
        name: "BDARWHD",
        formula: "sum_{i<n} (-4 x_i + 3)^2 + (x_i^2 + x_n^2)^2; x0 = 1",
        admits: two_plus,
        start: |n| vec![1.0; n],
        terms: bdarwhd,
    },
    RegistryEntry {
        name: "DQRTIC",
        formula: "sum_i (x_i - i)^4; x0 = 2",
        admits: any_n,
        start: |n| vec![2.0; n],
        terms: dqrtic,
    },
    RegistryEntry {
        name: "TRIDIA",
        formula: "(x_1 - 1)^2 + sum_{i>=2} i (2 x_i - x_{i-1})^2; x0 = 1",
        admits: two_plus,
        start: |n| vec![1.0; n],
        terms: tridia,
    },
    RegistryEntry {
        name: "ENGVAL1",
        formula: "sum_{i<n} (x_i^2 + x_{i+1}^2)^2 + (-4 x_i + 3); x0 = 2",
        admits: two_plus,
        start: |n| vec![2.0; n],
        terms: engval1,
    },
    RegistryEntry {
        name: "NONDIA",
        formula: "(x_1 - 1)^2 + sum_{i>=2} 100 (x_1 - x_{i-1}^2)^2; x0 = -1",
        admits: two_plus,
        start: |n| vec![-1.0; n],
        terms: nondia,
    },
    RegistryEntry {
        name: "WOODS",
        formula: "Wood function on consecutive blocks of 4; x0 = (-3, -1, -3, -1, ...)",
        admits: blocks_of_four,
        start: |n| (0..n).map(|i| if i % 2 == 0 { -3.0 } else { -1.0 }).collect(),
        terms: woods,
    },
    RegistryEntry {
        name: "POWELLSG",
        formula: "Powell singular function on blocks of 4; x0 = (3, -1, 0, 1, ...)",
        admits: blocks_of_four,
        start: |n| (0..n).map(|i| [3.0, -1.0, 0.0, 1.0][i % 4]).collect(),
        terms: powellsg,
    },
    RegistryEntry {
        name: "EDENSCH",
        formula: "16 + sum_{i<n} (x_i - 2)^4 + (x_i x_{i+1} - 2 x_{i+1})^2 + (x_{i+1} + 1)^2; x0 = 0",
        admits: two_plus,
        start: |n| vec![0.0; n],
        terms: edensch,
    },
    RegistryEntry {
        name: "CUBE",
        formula: "(x_1 - 1)^2 + sum_{i>=2} 100 (x_i - x_{i-1}^3)^2; x0 = (-1.2, 1, ...)",
        admits: two_plus,
        start: alternating,
        terms: cube,
    },
    RegistryEntry {
        name: "EG2",
        formula: "sum_{i<n} sin(x_1 + x_i^2 - 1) + sin(x_n^2) / 2; x0 = 0",
        admits: two_plus,
        start: |n| vec![0.0; n],
        terms: eg2,
    },
    RegistryEntry {
        name: "HILBERT",
        formula: "x^T A x / 2 with A_ij = 1 / (i + j - 1); x0 = -3",
        admits: dense_only,
        start: |n| vec![-3.0; n],
        terms: hilbert,
    },
    RegistryEntry {
        name: "INDEF",
        formula: "sum_i x_i + sum_{1<i<n} cos(2 x_i - x_n - x_1) / 2; x0_i = i / (n + 1); unbounded below",
        admits: three_plus,
        start: |n| (1..=n).map(|i| i as f64 / (n + 1) as f64).collect(),
        terms: indef,
    },
    RegistryEntry {
        name: "QUADRATIC",
        formula: "sum_i i x_i^2 / 2; x0 = 1",
        admits: any_n,
        start: |n| vec![1.0; n],
        terms: quadratic,
    },
];

pub fn registry_entries() -> &'static [RegistryEntry] {
    ENTRIES
}

/// Looks up a registry problem by (case-insensitive) name.
pub fn get_problem(name: &str, n: usize) -> Result<ObjectiveProblem> {
    let entry = ENTRIES
        .iter()
        .find(|e| e.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))?;
    (entry.admits)(n).map_err(|reason| Error::ProblemDimension {
        name: entry.name.to_string(),
        n,
        reason: reason.to_string(),
    })?;
    Ok(ObjectiveProblem::new(std::sync::Arc::new(Analytic {
        name: entry.name.to_string(),
        n,
        x0: (entry.start)(n),
        terms: entry.terms,
    })))
}
