//! Plot-ready CSV files. Floats are written with six decimals so repeated
//! runs produce byte-identical files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{cell_stats, HarnessError, RunResult};
use crate::metrics::MetricsError;
use crate::scm::EnforcementStrategy;

pub const RAW_HEADER: &str =
    "strategy,mno_count,run,seed,full_pct,partial_pct,mean_congestion,admitted,throughput";
pub const AGGREGATE_HEADER: &str = "strategy,mno_count,n,mean_partial,ci_partial,mean_full,ci_full";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: EnforcementStrategy,
    pub mno_count: u32,
    pub n: usize,
    pub mean_partial: f64,
    pub ci_partial: f64,
    pub mean_full: f64,
    pub ci_full: f64,
}

pub fn aggregate_results(rows: &[RunResult], confidence: f64) -> Result<Vec<AggregateRow>, MetricsError> {
    Ok(cell_stats(rows, confidence)?
        .into_iter()
        .map(|((strategy, mno_count), (partial, full))| AggregateRow {
            strategy,
            mno_count,
            n: partial.n_runs,
            mean_partial: partial.mean,
            ci_partial: partial.ci_halfwidth,
            mean_full: full.mean,
            ci_full: full.ci_halfwidth,
        })
        .collect())
}

pub fn write_raw_csv<W: Write>(w: W, rows: &[RunResult]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "{RAW_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.6},{:.6},{:.6},{},{:.6}",
            r.strategy,
            r.mno_count,
            r.run,
            r.seed,
            r.full_pct,
            r.partial_pct,
            r.mean_congestion,
            r.admitted,
            r.throughput
        )?;
    }
    w.flush()
}

pub fn write_aggregate_csv<W: Write>(w: W, rows: &[AggregateRow]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for a in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            a.strategy, a.mno_count, a.n, a.mean_partial, a.ci_partial, a.mean_full, a.ci_full
        )?;
    }
    w.flush()
}

/// Parses a raw results CSV back into rows.
pub fn read_raw_csv<R: Read>(r: R) -> Result<Vec<RunResult>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize()
        .map(|row| row.map_err(HarnessError::from))
        .collect()
}
