use std::path::{Path, PathBuf};
use std::time::Instant;

use macrophase_core::falsifier::{bound_sign_census, falsify_triangle, falsify_uncertainty, FalsifierReport};
use macrophase_core::scenarios::{self, definite_state_check};
use macrophase_core::{PeresReport, ScenarioKind, TimeSeries};
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_config, FileConfig};
use crate::error::{CliError, Result};
use crate::output::{self, BoundsDocument, RunManifest};

/// Largest tolerated `|<A> - alpha conj(beta) Z|` and `|<A'> - alpha conj(beta)|`.
pub const PERES_RESIDUAL_LIMIT: f64 = 1e-8;
/// Largest tolerated `|([A, s_z] - A) v|`.
pub const COMMUTATOR_LIMIT: f64 = 1e-10;
/// Largest tolerated mismatch between dense spin-operator and branch-form moments.
pub const STRUCTURAL_LIMIT: f64 = 1e-9;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A bound verdict is `violated`, or the state is definite.
    Violation,
    /// A numerical invariant exceeded its limit.
    InvariantBreach,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Violation => "violation",
            Status::InvariantBreach => "invariant_breach",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Violation | Status::InvariantBreach => 2,
        }
    }

    fn worst(self, other: Status) -> Status {
        match (self, other) {
            (Status::InvariantBreach, _) | (_, Status::InvariantBreach) => Status::InvariantBreach,
            (Status::Violation, _) | (_, Status::Violation) => Status::Violation,
            _ => Status::Ok,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub status: Status,
}

#[allow(clippy::too_many_arguments)]
fn finish(
    out_dir: &Path,
    command: &'static str,
    config_path: Option<&Path>,
    config: Option<&FileConfig>,
    started: Instant,
    mut outputs: Vec<PathBuf>,
    seed: u64,
    status: Status,
    details: serde_json::Value,
) -> Result<Outcome> {
    let manifest_path = out_dir.join("manifest.json");
    outputs.push(manifest_path.clone());
    let manifest = RunManifest {
        command,
        config_path: config_path.map(Path::to_path_buf),
        config: config.map(serde_json::to_value).transpose()?,
        version: VERSION,
        duration_seconds: started.elapsed().as_secs_f64(),
        outputs,
        seed,
        status: status.as_str(),
        details,
    };
    output::write_json(&manifest_path, &manifest)?;
    Ok(Outcome { manifest, manifest_path, status })
}

fn series_status(series: &TimeSeries) -> (Status, serde_json::Value) {
    let mut status = if series.any_violation() { Status::Violation } else { Status::Ok };
    let structural = series.rows.iter().filter_map(|r| r.structural_residual).fold(0.0, f64::max);
    let mut details = json!({
        "definite_state": series.definite_state,
        "violations": output::violation_entries(series),
    });
    if series.rows.iter().any(|r| r.structural_residual.is_some()) {
        details["max_structural_residual"] = json!(structural);
        if structural.is_nan() || structural > STRUCTURAL_LIMIT {
            status = status.worst(Status::InvariantBreach);
        }
    }
    (status, details)
}

fn peres_status(report: &PeresReport) -> (Status, serde_json::Value) {
    let (ra, rp, rc) = (report.max_residual_a(), report.max_residual_a_prime(), report.commutator_residual);
    let ok = ra < PERES_RESIDUAL_LIMIT && rp < PERES_RESIDUAL_LIMIT && rc < COMMUTATOR_LIMIT;
    let details = json!({
        "max_residual_a": ra,
        "max_residual_a_prime": rp,
        "commutator_residual": rc,
        "min_abs_z": report.min_abs_z,
        "decay_threshold": report.decay_threshold,
        "first_decay_time": report.first_decay_time,
    });
    (if ok { Status::Ok } else { Status::InvariantBreach }, details)
}

/// `run <config>`: one scenario, written to `out_dir`.
pub fn cmd_run(config_path: &Path, out_dir: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let (file, cfg) = parse_config(config_path)?;
    output::ensure_dir(out_dir)?;
    let series = scenarios::run(&cfg)?;
    let definite = if cfg.is_definite() { Some(definite_state_check(&cfg)?) } else { None };

    let mut outputs = Vec::new();
    let ts = out_dir.join("timeseries.csv");
    output::write_timeseries_csv(&ts, &series)?;
    outputs.push(ts);
    let bj = out_dir.join("bounds.json");
    output::write_json(&bj, &BoundsDocument::new(&series, definite.as_ref()))?;
    outputs.push(bj);

    let (mut status, mut details) = series_status(&series);
    if cfg.kind == ScenarioKind::Peres {
        let report = scenarios::run_peres(&cfg)?;
        let pc = out_dir.join("peres.csv");
        output::write_peres_csv(&pc, &report)?;
        let pj = out_dir.join("peres.json");
        output::write_json(&pj, &report)?;
        outputs.extend([pc, pj]);
        let (s, d) = peres_status(&report);
        status = status.worst(s);
        details["peres"] = d;
    }
    finish(out_dir, "run", Some(config_path), Some(&file), started, outputs, cfg.seed, status, details)
}

#[derive(Serialize)]
pub struct FalsifierDocument {
    pub trials: u32,
    pub seed: u64,
    pub uncertainty: FalsifierReport,
    pub triangle: FalsifierReport,
    pub bound_sign: FalsifierReport,
}

pub fn falsifier_document(trials: u32, seed: u64) -> Result<FalsifierDocument> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    Ok(FalsifierDocument {
        trials,
        seed,
        uncertainty: falsify_uncertainty(trials, seed)?,
        triangle: falsify_triangle(trials, seed)?,
        bound_sign: bound_sign_census(trials, seed)?,
    })
}

/// `falsify`: writes `falsifier_report.json`. Only uncertainty violations change the
/// exit status; the other censuses are informational.
pub fn cmd_falsify(trials: u32, seed: u64, out_dir: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let doc = falsifier_document(trials, seed)?;
    output::ensure_dir(out_dir)?;
    let path = out_dir.join("falsifier_report.json");
    output::write_json(&path, &doc)?;
    let status = if doc.uncertainty.violations > 0 { Status::Violation } else { Status::Ok };
    let details = json!({
        "trials": trials,
        "uncertainty_violations": doc.uncertainty.violations,
        "triangle_violations": doc.triangle.violations,
        "bound_sign_violations": doc.bound_sign.violations,
    });
    finish(out_dir, "falsify", None, None, started, vec![path], seed, status, details)
}

pub(crate) fn merge_status(a: Status, b: Status) -> Status {
    a.worst(b)
}

pub(crate) fn status_of(series: &TimeSeries) -> Status {
    series_status(series).0
}

pub(crate) fn finish_sweep(
    out_dir: &Path,
    config_path: &Path,
    file: &FileConfig,
    started: Instant,
    outputs: Vec<PathBuf>,
    status: Status,
    details: serde_json::Value,
) -> Result<Outcome> {
    finish(out_dir, "sweep", Some(config_path), Some(file), started, outputs, file.seed, status, details)
}
