//! JSON scenario files.
//!
//! Unknown keys are rejected everywhere. Every field except `scenario`, `grid`,
//! `branches` and `coupling_length` has a default; [`FileConfig::resolved`] fills
//! them in so the manifest can echo the exact configuration that ran.

use std::path::Path;

use macrophase_core::{BranchSpec, Complex64, Potential, PropagatorConfig, ScenarioConfig, ScenarioKind};
use macrophase_core::scenarios::{GridSpec, PacketSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: ScenarioKind,
    pub grid: GridFile,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub potential: PotentialFile,
    #[serde(default)]
    pub packet: PacketFile,
    pub branches: Vec<BranchFile>,
    pub coupling_length: f64,
    #[serde(default = "zero_times")]
    pub times: Vec<f64>,
    #[serde(default)]
    pub pair: Option<[u32; 2]>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub falsifier_mode: bool,
    /// Fixed split-step size; chosen automatically when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Coefficient `b` of a system Hamiltonian `b s_z` (spin scenarios).
    #[serde(default)]
    pub spin_field: f64,
    #[serde(default = "default_decay_threshold")]
    pub decay_threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub n_points: usize,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketFile {
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

impl Default for PacketFile {
    fn default() -> Self {
        PacketFile { center: 0.0, width: 1.0, momentum: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialFile {
    #[default]
    #[serde(alias = "free")]
    None,
    Linear(LinearParams),
    Harmonic(HarmonicParams),
    Quartic(QuarticParams),
    Polynomial(PolynomialParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearParams {
    pub k: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicParams {
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarticParams {
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialParams {
    /// `a_0, a_1, ...` of `sum a_n q^n`.
    pub coefficients: Vec<f64>,
}

/// One branch. Spin scenarios list `alpha` (spin up) first and `beta` second, and may
/// omit the eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchFile {
    #[serde(default)]
    pub c_re: f64,
    #[serde(default)]
    pub c_im: f64,
    #[serde(default)]
    pub eigenvalue: Option<f64>,
    #[serde(default)]
    pub label: Option<u32>,
}

fn one() -> f64 {
    1.0
}

fn zero_times() -> Vec<f64> {
    vec![0.0]
}

fn default_decay_threshold() -> f64 {
    0.1
}

fn is_spin(kind: ScenarioKind) -> bool {
    matches!(kind, ScenarioKind::SternGerlach | ScenarioKind::Peres)
}

impl PotentialFile {
    pub fn to_potential(&self) -> Potential {
        match self {
            PotentialFile::None => Potential::Free,
            PotentialFile::Linear(p) => Potential::Linear { k: p.k },
            PotentialFile::Harmonic(p) => Potential::Harmonic { omega: p.omega },
            PotentialFile::Quartic(p) => Potential::Quartic { lambda: p.lambda },
            PotentialFile::Polynomial(p) => Potential::Polynomial { coefficients: p.coefficients.clone() },
        }
    }
}

impl FileConfig {
    /// Parses JSON text; `origin` only labels error messages.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            CliError::Schema { path: origin.to_path_buf(), field, message: e.into_inner().to_string() }
        })
    }

    pub fn from_value(value: serde_json::Value, origin: &Path) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let field = e.path().to_string();
            CliError::Schema { path: origin.to_path_buf(), field, message: e.into_inner().to_string() }
        })
    }

    /// The same configuration with branch labels and spin eigenvalues filled in.
    pub fn resolved(&self) -> Result<FileConfig> {
        let spin = is_spin(self.scenario);
        if spin && self.branches.len() != 2 {
            return Err(CliError::Model(macrophase_core::Error::Config(format!(
                "{} needs exactly two branches (alpha, beta), got {}",
                self.scenario.as_str(),
                self.branches.len()
            ))));
        }
        let mut out = self.clone();
        for (k, b) in out.branches.iter_mut().enumerate() {
            b.label.get_or_insert(k as u32 + 1);
            if b.eigenvalue.is_none() {
                if !spin {
                    return Err(CliError::Schema {
                        path: Default::default(),
                        field: format!("branches[{k}].eigenvalue"),
                        message: "general scenarios need an eigenvalue for every branch".into(),
                    });
                }
                b.eigenvalue = Some(if k == 0 { 0.5 } else { -0.5 });
            }
        }
        Ok(out)
    }

    /// Resolves defaults, converts to the model configuration and validates it.
    pub fn to_scenario(&self) -> Result<ScenarioConfig> {
        let r = self.resolved()?;
        let branches = r
            .branches
            .iter()
            .map(|b| {
                BranchSpec::new(
                    b.label.unwrap_or_default(),
                    Complex64::new(b.c_re, b.c_im),
                    b.eigenvalue.unwrap_or_default(),
                )
            })
            .collect();
        let cfg = ScenarioConfig {
            kind: r.scenario,
            grid: GridSpec { n_points: r.grid.n_points, q_min: r.grid.q_min, q_max: r.grid.q_max },
            mass: r.mass,
            potential: r.potential.to_potential(),
            packet: PacketSpec { center: r.packet.center, width: r.packet.width, momentum: r.packet.momentum },
            branches,
            coupling_length: r.coupling_length,
            times: r.times.clone(),
            pair: r.pair.map(|[i, j]| (i, j)),
            seed: r.seed,
            falsifier_mode: r.falsifier_mode,
            propagator: PropagatorConfig { dt: r.dt, ..PropagatorConfig::default() },
            spin_field: r.spin_field,
            decay_threshold: r.decay_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads, parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<(FileConfig, ScenarioConfig)> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    let file = FileConfig::from_json(&text, path)?;
    let resolved = file.resolved().map_err(|e| with_origin(e, path))?;
    let scenario = resolved.to_scenario().map_err(|e| with_origin(e, path))?;
    Ok((resolved, scenario))
}

fn with_origin(e: CliError, path: &Path) -> CliError {
    match e {
        CliError::Schema { field, message, .. } => CliError::Schema { path: path.to_path_buf(), field, message },
        other => other,
    }
}
