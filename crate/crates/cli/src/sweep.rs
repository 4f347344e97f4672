//! Parameter sweeps over one numeric config field.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::commands::{finish_sweep, merge_status, status_of, Outcome, Status};
use crate::config::{parse_config, FileConfig};
use crate::error::{CliError, Result};
use crate::output;

/// Sets `|alpha|^2` of a spin scenario, keeping the phases of both coefficients.
pub const ALPHA2_AXIS: &str = "alpha2";

#[derive(Clone, Debug, PartialEq)]
pub struct AxisSpec {
    /// Dotted path into the config, e.g. `potential.params.lambda` or `branches.0.c_re`.
    pub field: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FromStr for AxisSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.rsplitn(4, ':').collect();
        let [count, stop, start, field] = parts[..] else {
            return Err(CliError::Usage(format!("axis `{s}` is not FIELD:START:STOP:COUNT")));
        };
        let number = |x: &str, what: &str| {
            x.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Usage(format!("axis {what} `{x}` is not a finite number")))
        };
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("axis count `{count}` is not a non-negative integer")))?;
        if count < 2 {
            return Err(CliError::Usage(format!("axis count must be at least 2, got {count}")));
        }
        if field.is_empty() {
            return Err(CliError::Usage("axis field is empty".into()));
        }
        Ok(AxisSpec { field: field.to_string(), start: number(start, "start")?, stop: number(stop, "stop")?, count })
    }
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count - 1;
        (0..self.count)
            .map(|k| if k == n { self.stop } else { self.start + (self.stop - self.start) * k as f64 / n as f64 })
            .collect()
    }
}

/// Returns a copy of `base` with the axis field set to `value`.
pub fn apply_axis(base: &FileConfig, field: &str, value: f64) -> Result<FileConfig> {
    if field == ALPHA2_AXIS {
        return set_alpha2(base, value);
    }
    let mut doc = serde_json::to_value(base)?;
    let slot = lookup(&mut doc, field)?;
    *slot = match slot {
        Value::Null => json!(value),
        Value::Number(n) if n.is_f64() => json!(value),
        Value::Number(n) => {
            let integral = value.fract() == 0.0 && value >= 0.0 && value <= u64::MAX as f64;
            if !integral && (n.is_u64() || n.is_i64()) {
                return Err(CliError::Usage(format!("axis field `{field}` is an integer; {value} is not")));
            }
            json!(value as u64)
        }
        _ => return Err(CliError::Usage(format!("axis field `{field}` is non-numeric"))),
    };
    FileConfig::from_value(doc, Path::new("<sweep>"))
}

fn lookup<'a>(doc: &'a mut Value, field: &str) -> Result<&'a mut Value> {
    let missing = || CliError::Usage(format!("axis field `{field}` does not exist in the config"));
    let mut cur = doc;
    for key in field.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(key).ok_or_else(missing)?,
            Value::Array(items) => {
                let k: usize = key.parse().map_err(|_| missing())?;
                items.get_mut(k).ok_or_else(missing)?
            }
            _ => return Err(missing()),
        };
    }
    Ok(cur)
}

fn set_alpha2(base: &FileConfig, a2: f64) -> Result<FileConfig> {
    if base.branches.len() != 2 || base.scenario == macrophase_core::ScenarioKind::General {
        return Err(CliError::Usage(format!("axis `{ALPHA2_AXIS}` needs a spin scenario with two branches")));
    }
    if !(0.0..=1.0).contains(&a2) {
        return Err(CliError::Usage(format!("{ALPHA2_AXIS} must lie in [0, 1], got {a2}")));
    }
    let mut out = base.clone();
    for (b, w) in out.branches.iter_mut().zip([a2, 1.0 - a2]) {
        let phase = if b.c_re == 0.0 && b.c_im == 0.0 { 0.0 } else { b.c_im.atan2(b.c_re) };
        let r = w.sqrt();
        b.c_re = r * phase.cos();
        b.c_im = r * phase.sin();
    }
    Ok(out)
}

/// `sweep <config> --axis ...`: runs every grid point in parallel (at most `jobs`
/// threads) and writes one wide `sweep.csv` keyed by the swept value.
pub fn cmd_sweep(config_path: &Path, axis: &AxisSpec, out_dir: &Path, jobs: Option<usize>) -> Result<Outcome> {
    let started = Instant::now();
    let (base, _) = parse_config(config_path)?;
    let values = axis.values();
    let configs = values
        .iter()
        .map(|&v| {
            let file = apply_axis(&base, &axis.field, v)?;
            let cfg = file.to_scenario()?;
            Ok((file, cfg))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<_> =
        pool.install(|| configs.par_iter().map(|(_, cfg)| macrophase_core::scenarios::run(cfg)).collect());

    output::ensure_dir(out_dir)?;
    let path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec![axis.field.clone()];
    header.extend(output::timeseries_header());
    w.write_record(&header)?;
    let mut status = Status::Ok;
    let mut per_point = Vec::new();
    for (value, result) in values.iter().zip(results) {
        let series = result?;
        let s = status_of(&series);
        status = merge_status(status, s);
        per_point.push(json!({ "value": value, "status": s.as_str() }));
        for row in &series.rows {
            let mut rec = vec![output::num(*value)];
            rec.extend(output::timeseries_record(row));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|source| CliError::Write { path: path.clone(), source })?;
    let details = json!({ "axis": axis.field, "values": values, "points": per_point });
    finish_sweep(out_dir, config_path, &base, started, vec![path], status, details)
}
