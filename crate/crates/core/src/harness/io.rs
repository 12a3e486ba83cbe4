//! Report files: one CSV row per run, or the full reports as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{RunReport, Status};
use crate::error::{Error, Result};

/// CSV columns, in order.
pub const CSV_COLUMNS: [&str; 13] = [
    "problem",
    "n",
    "solver",
    "status",
    "n_nli",
    "n_fact",
    "n_refresh",
    "ave_K",
    "n_sub",
    "n_sec",
    "f_final",
    "gnorm_final",
    "wall_s",
];

/// The table columns of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub problem: String,
    pub n: usize,
    pub solver: String,
    pub status: String,
    pub n_nli: usize,
    pub n_fact: usize,
    pub n_refresh: usize,
    #[serde(rename = "ave_K")]
    pub ave_k: f64,
    pub n_sub: usize,
    pub n_sec: usize,
    pub f_final: f64,
    pub gnorm_final: f64,
    pub wall_s: f64,
}

impl ReportRow {
    pub fn from_report(r: &RunReport) -> Self {
        Self {
            problem: r.problem.clone(),
            n: r.n,
            solver: r.solver.clone(),
            status: r.status.as_str().into(),
            n_nli: r.counters.n_nli,
            n_fact: r.counters.n_fact,
            n_refresh: r.counters.n_refresh,
            ave_k: r.counters.ave_subspace_dim,
            n_sub: r.counters.n_subspace_steps,
            n_sec: r.counters.n_secant_calls,
            f_final: r.f_final,
            gnorm_final: r.gnorm_final,
            wall_s: r.wall_s,
        }
    }

    pub fn converged(&self) -> bool {
        Status::parse(&self.status).is_some_and(Status::converged)
    }
}

pub fn write_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let headers = r.headers().map_err(csv_error)?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Config(format!("{}: unexpected CSV columns", path.display())));
    }
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

pub fn write_json(path: &Path, reports: &[RunReport]) -> Result<()> {
    let text = serde_json::to_string_pretty(reports)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Vec<RunReport>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Rows from either format, chosen by extension.
pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(read_json(path)?.iter().map(ReportRow::from_report).collect()),
        _ => read_csv(path),
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("CSV: {other:?}")),
    }
}
