//! Reader and writer for the LIBSVM sparse text format.

use std::fmt::Write as _;
use std::path::Path;

use sprs::TriMat;

use super::{ClassificationData, LabelSet};
use crate::error::{Error, Result};

/// How file labels are mapped on load.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LabelMap {
    /// Keep `{-1, +1}` or `{0, 1}` whichever the file uses.
    #[default]
    Keep,
    PlusMinusOne,
    ZeroOne,
}

pub fn load_libsvm(path: &Path) -> Result<ClassificationData> {
    load_libsvm_with(path, LabelMap::Keep, None)
}

/// Loads a file; the feature count is the largest index seen unless
/// `n_features` is given.
pub fn load_libsvm_with(path: &Path, map: LabelMap, n_features: Option<usize>) -> Result<ClassificationData> {
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut labels = Vec::new();
    let mut entries = Vec::new();
    let mut max_index = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line");
        let label: f64 =
            label_tok.parse().map_err(|_| err(lineno + 1, format!("bad label {label_tok:?}")))?;
        let row = labels.len();
        labels.push(label);
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) =
                tok.split_once(':').ok_or_else(|| err(lineno + 1, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| err(lineno + 1, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(err(lineno + 1, "indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(err(lineno + 1, format!("index {idx} is not increasing")));
            }
            prev = idx;
            let val: f64 = val.parse().map_err(|_| err(lineno + 1, format!("bad value {val:?}")))?;
            if !val.is_finite() {
                return Err(err(lineno + 1, format!("non-finite value {val}")));
            }
            max_index = max_index.max(idx);
            entries.push((row, idx - 1, val));
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyData(path.to_path_buf()));
    }
    let n = match n_features {
        Some(n) if n < max_index => {
            return Err(Error::Contract(format!("feature index {max_index} exceeds requested dimension {n}")))
        }
        Some(n) => n,
        None => max_index,
    };
    let file_set = if labels.iter().all(|&b| LabelSet::ZeroOne.contains(b)) {
        LabelSet::ZeroOne
    } else if labels.iter().all(|&b| LabelSet::PlusMinusOne.contains(b)) {
        LabelSet::PlusMinusOne
    } else {
        return Err(Error::Contract("labels must be in {-1, +1} or {0, 1}".into()));
    };
    let mut tri = TriMat::new((labels.len(), n));
    for (i, j, v) in entries {
        tri.add_triplet(i, j, v);
    }
    let data = ClassificationData::new(tri.to_csr(), labels, file_set)?;
    Ok(match map {
        LabelMap::Keep => data,
        LabelMap::PlusMinusOne => data.relabel(LabelSet::PlusMinusOne),
        LabelMap::ZeroOne => data.relabel(LabelSet::ZeroOne),
    })
}

pub fn write_libsvm(path: &Path, data: &ClassificationData) -> Result<()> {
    let mut out = String::new();
    for (i, &b) in data.labels().iter().enumerate() {
        if b > 0.0 && data.label_set() == LabelSet::PlusMinusOne {
            out.push('+');
        }
        write!(out, "{b}").expect("string write");
        for (j, &v) in data.row(i).iter() {
            write!(out, " {}:{v}", j + 1).expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
