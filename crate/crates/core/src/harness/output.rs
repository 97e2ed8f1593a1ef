//! `trace.csv` and `summary.json` writers.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{rate_fit_trace, Feasibility, RateFit};
use crate::simulator::{Algorithm, MetricsTrace, TraceRow};

pub const TRACE_HEADER: [&str; 11] = [
    "k",
    "stat_total",
    "stat_prox",
    "stat_consensus",
    "res_combined",
    "res_consensus",
    "res_split",
    "err_sq",
    "phi",
    "scalars_tx",
    "wall_ms",
];

fn row_fields(r: &TraceRow) -> [String; 11] {
    [
        r.k.to_string(),
        r.stat_total.to_string(),
        r.stat_prox.to_string(),
        r.stat_consensus.to_string(),
        r.res_combined.to_string(),
        r.res_consensus.to_string(),
        r.res_split.to_string(),
        r.err_sq.to_string(),
        r.phi.to_string(),
        r.scalars_tx.to_string(),
        r.wall_ms.to_string(),
    ]
}

/// Serialize rows as CSV. Without `wall_clock` the last column is written as
/// `0`, which makes the file a pure function of the configuration.
pub fn trace_csv(rows: &[TraceRow], wall_clock: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).expect("in-memory write");
    for r in rows {
        let mut f = row_fields(r);
        if !wall_clock {
            f[10] = "0".into();
        }
        w.write_record(&f).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> io::Result<()> {
    fs::write(path, trace_csv(rows, true))
}

/// Parse a file written by [`write_trace`].
pub fn read_trace(path: &Path) -> io::Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(io::Error::other)?;
    let bad = |e: String| io::Error::new(io::ErrorKind::InvalidData, e);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io::Error::other)?;
        let f = |i: usize| -> io::Result<f64> { rec[i].parse::<f64>().map_err(|e| bad(e.to_string())) };
        rows.push(TraceRow {
            k: rec[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            stat_total: f(1)?,
            stat_prox: f(2)?,
            stat_consensus: f(3)?,
            res_combined: f(4)?,
            res_consensus: f(5)?,
            res_split: f(6)?,
            err_sq: f(7)?,
            phi: f(8)?,
            scalars_tx: rec[9].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            wall_ms: f(10)?,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub round: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Option<Algorithm>,
    pub seed: u64,
    pub rounds_completed: usize,
    /// Last trace row, identical to the final line of `trace.csv`.
    pub last: Option<TraceRow>,
    pub total_vectors: u64,
    pub total_scalars: u64,
    pub rate_fit: Option<RateFit>,
    pub lemma1_checked: usize,
    pub lemma1_violations: usize,
    pub feasibility: Option<Feasibility>,
    pub divergence: Option<Divergence>,
}

impl RunSummary {
    pub fn from_trace(
        trace: &MetricsTrace,
        seed: u64,
        feasibility: Option<Feasibility>,
        divergence: Option<Divergence>,
    ) -> Self {
        RunSummary {
            algorithm: trace.algorithm,
            seed,
            rounds_completed: trace.ledger.rounds(),
            last: trace.last().copied(),
            total_vectors: trace.ledger.total_vectors(),
            total_scalars: trace.ledger.total_scalars(),
            rate_fit: rate_fit_trace(trace).ok(),
            lemma1_checked: trace.lemma1.len(),
            lemma1_violations: trace.lemma1_violations(),
            feasibility,
            divergence,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}
