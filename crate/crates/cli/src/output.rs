//! CSV and JSON writers.
//!
//! Time-series column order is fixed: [`BASE_COLUMNS`], then `lhs/rhs/slack/verdict`
//! for every bound in `BoundKind::ALL` order, then [`EXTRA_COLUMNS`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use macrophase_core::scenarios::DefiniteStateReport;
use macrophase_core::{BoundKind, BoundReport, PeresReport, TimeRow, TimeSeries};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const BASE_COLUMNS: [&str; 14] = [
    "t", "re_z", "im_z", "abs_z", "theta", "phi_rel", "a1", "a2", "var1", "var2", "comm", "d12", "d23", "d13",
];

pub const EXTRA_COLUMNS: [&str; 2] = ["observable", "structural_residual"];

pub const PERES_COLUMNS: [&str; 13] = [
    "t",
    "re_z",
    "im_z",
    "abs_z",
    "re_expect_a",
    "im_expect_a",
    "re_predicted",
    "im_predicted",
    "residual_a",
    "residual_abs",
    "re_expect_a_prime",
    "im_expect_a_prime",
    "residual_a_prime",
];

pub fn timeseries_header() -> Vec<String> {
    let mut h: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for kind in BoundKind::ALL {
        for part in ["lhs", "rhs", "slack", "verdict"] {
            h.push(format!("{}_{part}", kind.as_str()));
        }
    }
    h.extend(EXTRA_COLUMNS.iter().map(|s| s.to_string()));
    h
}

/// Shortest round-trip text; scientific notation outside `[1e-4, 1e7)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e7).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn timeseries_record(row: &TimeRow) -> Vec<String> {
    let d = &row.distances;
    let mut r: Vec<String> = [
        row.t, row.z.re, row.z.im, row.abs_z, row.theta, row.phi, row.a1, row.a2, row.var1, row.var2, row.comm, d.d12,
        d.d23, d.d13,
    ]
    .iter()
    .map(|&x| num(x))
    .collect();
    for kind in BoundKind::ALL {
        match row.bound(kind) {
            Some(b) => {
                r.extend([num(b.lhs), num(b.rhs), num(b.slack)]);
                r.push(b.verdict.as_str().to_string());
            }
            None => r.extend(std::iter::repeat_n(String::new(), 4)),
        }
    }
    r.push(num(row.observable));
    r.push(row.structural_residual.map(num).unwrap_or_default());
    r
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })
}

pub fn write_timeseries_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(timeseries_header())?;
    for row in &series.rows {
        w.write_record(timeseries_record(row))?;
    }
    w.flush().map_err(|source| CliError::Write { path: path.to_path_buf(), source })?;
    Ok(())
}

pub fn write_peres_csv(path: &Path, report: &PeresReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(PERES_COLUMNS)?;
    for r in &report.rows {
        let rec = [
            r.t,
            r.z.re,
            r.z.im,
            r.abs_z,
            r.expect_a.re,
            r.expect_a.im,
            r.predicted.re,
            r.predicted.im,
            r.residual_a,
            r.residual_abs,
            r.expect_a_prime.re,
            r.expect_a_prime.im,
            r.residual_a_prime,
        ];
        w.write_record(rec.iter().map(|&x| num(x)))?;
    }
    w.flush().map_err(|source| CliError::Write { path: path.to_path_buf(), source })?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

#[derive(Serialize)]
pub struct BoundsRow<'a> {
    pub t: f64,
    pub bounds: &'a [BoundReport],
}

#[derive(Serialize)]
pub struct ViolationEntry {
    pub t: f64,
    pub bound: &'static str,
    pub slack: f64,
}

/// Contents of `bounds.json`.
#[derive(Serialize)]
pub struct BoundsDocument<'a> {
    pub scenario: &'static str,
    pub pair: [u32; 2],
    pub ci2: f64,
    pub cj2: f64,
    pub dt: f64,
    pub definite_state: bool,
    pub definite_state_report: Option<&'a DefiniteStateReport>,
    pub violations: Vec<ViolationEntry>,
    pub rows: Vec<BoundsRow<'a>>,
}

impl<'a> BoundsDocument<'a> {
    pub fn new(series: &'a TimeSeries, definite: Option<&'a DefiniteStateReport>) -> Self {
        BoundsDocument {
            scenario: series.kind.as_str(),
            pair: [series.pair.i, series.pair.j],
            ci2: series.ci2,
            cj2: series.cj2,
            dt: series.dt,
            definite_state: series.definite_state,
            definite_state_report: definite,
            violations: violation_entries(series),
            rows: series.rows.iter().map(|r| BoundsRow { t: r.t, bounds: &r.bounds }).collect(),
        }
    }
}

pub fn violation_entries(series: &TimeSeries) -> Vec<ViolationEntry> {
    series
        .violations()
        .map(|(t, b)| ViolationEntry { t, bound: b.kind.as_str(), slack: b.slack })
        .collect()
}

/// Provenance record written last by every command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config_path: Option<PathBuf>,
    /// The configuration with every default filled in.
    pub config: Option<serde_json::Value>,
    pub version: &'static str,
    pub duration_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = timeseries_header();
        assert_eq!(h.len(), 14 + 4 * BoundKind::ALL.len() + 2);
        assert_eq!(h[0], "t");
        assert_eq!(h[13], "d13");
        assert_eq!(h[14], "robertson_lhs");
        assert_eq!(h[17], "robertson_verdict");
        assert_eq!(h.last().unwrap(), "structural_residual");
    }
}
