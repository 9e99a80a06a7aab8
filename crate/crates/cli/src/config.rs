//! Run configuration files.
//!
//! A configuration is a TOML document with up to three tables:
//!
//! ```toml
//! [simulation]
//! K = 10.0            # kick strength
//! kbar = 2.9          # effective Planck constant
//! Pi = 0.005          # emission probability per kick
//! Delta = 0.04        # window width in units of kbar
//! n_kicks = 500
//! n_traj = 4000
//! n_max = 1024        # lattice half-width
//! seed = 20100101
//! checkpoints = [500] # kicks at which distributions are written
//! bin_width = 1.0     # histogram bin, units of kbar
//!
//! [sweep]
//! Pi = [0.0, 0.005, 0.01, 0.02]
//!
//! [model]
//! D_q = 30.7
//! t_s = 41.3
//! Pi = 0.01
//! Delta = 0.04
//! horizon = 500.0
//! dt = 1.0
//! ```
//!
//! Every key is optional; missing keys take the values shown above (the
//! `[sweep]` list is empty by default). Unknown keys are rejected.

use std::path::Path;

use qkr::ensemble::DEFAULT_BIN_WIDTH;
use qkr::params::{DEFAULT_N_MAX, DEFAULT_N_TRAJ};
use qkr::{ModelParams, SimParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct SimulationSection {
    pub K: f64,
    pub kbar: f64,
    pub Pi: f64,
    pub Delta: f64,
    pub n_kicks: usize,
    pub n_traj: usize,
    pub n_max: usize,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    pub bin_width: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            K: 10.0,
            kbar: 2.9,
            Pi: 0.005,
            Delta: 0.04,
            n_kicks: 500,
            n_traj: DEFAULT_N_TRAJ,
            n_max: DEFAULT_N_MAX,
            seed: 20_100_101,
            checkpoints: vec![500],
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }
}

impl SimulationSection {
    pub fn sim_params(&self) -> SimParams {
        SimParams {
            K: self.K,
            kbar: self.kbar,
            Pi: self.Pi,
            Delta: self.Delta,
            n_kicks: self.n_kicks,
            n_traj: self.n_traj,
            n_max: self.n_max,
            seed: self.seed,
            checkpoints: self.checkpoints.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct SweepSection {
    pub Pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct ModelSection {
    pub D_q: f64,
    pub t_s: f64,
    pub Pi: f64,
    pub Delta: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            D_q: 30.7,
            t_s: 41.3,
            Pi: 0.01,
            Delta: 0.04,
            horizon: 500.0,
            dt: 1.0,
        }
    }
}

impl ModelSection {
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let mp = ModelParams::new(self.D_q, self.t_s, self.Pi, self.Delta)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CliError::Config(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(CliError::Config(format!("dt must lie in (0, horizon], got {}", self.dt)));
        }
        Ok(mp)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub simulation: SimulationSection,
    pub sweep: SweepSection,
    pub model: ModelSection,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    fn validate(&self, text: &str) -> Result<(), CliError> {
        let sim = &self.simulation;
        if let Err(e) = sim.sim_params().validate() {
            let key = match &e {
                qkr::Error::InvalidParameter { name, .. } => Some(*name),
                _ => None,
            };
            return Err(CliError::Config(with_position(text, "simulation", key, e.to_string())));
        }
        if !(sim.bin_width.is_finite() && sim.bin_width > 0.0) {
            return Err(CliError::Config(with_position(
                text,
                "simulation",
                Some("bin_width"),
                format!("bin_width must be > 0, got {}", sim.bin_width),
            )));
        }
        for &pi in &self.sweep.Pi {
            if !(0.0..=1.0).contains(&pi) {
                return Err(CliError::Config(with_position(
                    text,
                    "sweep",
                    Some("Pi"),
                    format!("sweep value {pi} outside [0, 1]"),
                )));
            }
        }
        Ok(())
    }
}

/// Prefixes `msg` with the line of `key` inside `[table]`, when it can be found.
fn with_position(text: &str, table: &str, key: Option<&str>, msg: String) -> String {
    let Some(key) = key else { return msg };
    let mut in_table = false;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            in_table = trimmed.trim_start_matches('[').trim_end_matches(']').trim() == table;
            continue;
        }
        if in_table {
            if let Some(rest) = trimmed.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return format!("line {}, key `{table}.{key}`: {msg}", i + 1);
                }
            }
        }
    }
    format!("key `{table}.{key}` (default value): {msg}")
}
