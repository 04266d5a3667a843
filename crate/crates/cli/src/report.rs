//! The metrics stream: CSV rows `iter,elapsed_sec,f,metric`, plus the
//! binary shuttle format the multi-process transport uses to hand the
//! coordinator's records back to the parent process with exact bits.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

use gridnewton_dist::newton::IterRecord;

/// One metrics row. `elapsed_sec` under the in-process transport is forced
/// to zero so reruns of the same config and seed emit byte-identical CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub iter: usize,
    pub elapsed_sec: f64,
    pub f: f64,
    pub metric: Option<f64>,
}

pub const CSV_HEADER: &str = "iter,elapsed_sec,f,metric";

pub fn write_csv<W: Write>(mut w: W, rows: &[CsvRow]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        match row.metric {
            Some(m) => writeln!(w, "{},{},{},{}", row.iter, row.elapsed_sec, row.f, m)?,
            None => writeln!(w, "{},{},{},", row.iter, row.elapsed_sec, row.f)?,
        }
    }
    Ok(())
}

/// Converts the coordinator's training records to metrics rows.
/// `deterministic_clock` zeroes the elapsed column (in-process runs).
pub fn rows_from_records(records: &[IterRecord], deterministic_clock: bool) -> Vec<CsvRow> {
    records
        .iter()
        .map(|r| CsvRow {
            iter: r.iter,
            elapsed_sec: if deterministic_clock { 0.0 } else { r.elapsed_sec },
            f: r.f.expect("coordinator records carry the objective"),
            metric: r.metric,
        })
        .collect()
}

/// What the parent needs from each coordinator record: CSV fields plus the
/// damping value for the checkpoint header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub row: CsvRow,
    pub lambda: f64,
}

/// Serializes report rows as little-endian f64 quintuples after a count,
/// preserving exact bit patterns (an absent metric travels as NaN).
pub fn save_report(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + rows.len() * 40);
    bytes.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for r in rows {
        for v in [
            r.row.iter as f64,
            r.row.elapsed_sec,
            r.row.f,
            r.row.metric.unwrap_or(f64::NAN),
            r.lambda,
        ] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn load_report(path: &Path) -> Result<Vec<ReportRow>> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    if bytes.len() < 8 {
        bail!("report {} is truncated", path.display());
    }
    let count = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + count * 40 {
        bail!(
            "report {} holds {} bytes, expected {} rows",
            path.display(),
            bytes.len(),
            count
        );
    }
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let at = |k: usize| {
            let off = 8 + i * 40 + k * 8;
            f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
        };
        let metric = at(3);
        rows.push(ReportRow {
            row: CsvRow {
                iter: at(0) as usize,
                elapsed_sec: at(1),
                f: at(2),
                metric: (!metric.is_nan()).then_some(metric),
            },
            lambda: at(4),
        });
    }
    Ok(rows)
}

/// Serializes a parameter slice as little-endian f64 values.
pub fn save_theta_slice(theta: &[f64], path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(theta.len() * 8);
    for v in theta {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn load_theta_slice(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    if bytes.len() != expected * 8 {
        bail!(
            "{} holds {} bytes, expected {} parameters",
            path.display(),
            bytes.len(),
            expected
        );
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
