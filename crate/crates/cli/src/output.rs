//! CSV and manifest persistence.
//!
//! Every CSV has a header row, comma separators and LF line endings. Numbers
//! are written in scientific notation with 17 significant digits, which
//! round-trips every `f64` exactly. A missing value is an empty field.
//!
//! | file            | columns                                                |
//! |-----------------|--------------------------------------------------------|
//! | `energy.csv`    | `t, E_unfiltered, E_filtered, F0, FDelta, detected`    |
//! | `dist_t<k>.csv` | `P_over_kbar, f_unfiltered, f_filtered`                |
//! | `model.csv`     | `t, D0, F0, FDelta, detected, E0, EDelta, Ebar, Ebar_approx` |
//! | `classical.csv` | `t, E`                                                 |
//!
//! `E_filtered` is empty when no trajectory is detected. `f_filtered` is the
//! detected part of the ensemble without renormalization, so it sums to the
//! detected fraction.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use qkr::ensemble::{CheckpointDistributions, EnsembleResult, MomentumDistribution};
use qkr::model::ModelCurve;
use qkr::SimParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Bumped whenever a file layout changes.
pub const ARTIFACT_VERSION: u32 = 1;

pub const ENERGY_COLUMNS: [&str; 6] = ["t", "E_unfiltered", "E_filtered", "F0", "FDelta", "detected"];
pub const DIST_COLUMNS: [&str; 3] = ["P_over_kbar", "f_unfiltered", "f_filtered"];

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Parses a field written by [`fmt_num`]; an empty field is `None`.
pub fn parse_num(field: &str) -> Result<Option<f64>, String> {
    let s = field.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("`{s}` is not a number"))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Input(format!("{}: {other:?}", path.display())),
    }
}

/// Writes rows of already formatted fields under `header`.
pub fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_energy_csv(path: &Path, res: &EnsembleResult) -> Result<(), CliError> {
    let f0 = res.pop_f0();
    let fd = res.pop_fdelta();
    let det = res.detected_fraction();
    let rows = (0..res.mean_energy.len()).map(|t| {
        vec![
            t.to_string(),
            fmt_num(res.mean_energy[t]),
            fmt_opt(res.filtered_energy[t]),
            fmt_num(f0[t]),
            fmt_num(fd[t]),
            fmt_num(det[t]),
        ]
    });
    write_rows(path, &ENERGY_COLUMNS, rows)
}

pub fn dist_file_name(kick: usize) -> String {
    format!("dist_t{kick}.csv")
}

pub fn write_dist_csv(path: &Path, d: &CheckpointDistributions) -> Result<(), CliError> {
    if d.unfiltered.first_bin != d.filtered.first_bin
        || d.unfiltered.probabilities.len() != d.filtered.probabilities.len()
    {
        return Err(CliError::Input("filtered and unfiltered histograms have different bins".into()));
    }
    let centers = d.unfiltered.centers();
    let rows = centers.iter().enumerate().map(|(i, &p)| {
        vec![
            fmt_num(p),
            fmt_num(d.unfiltered.probabilities[i]),
            fmt_num(d.filtered.probabilities[i]),
        ]
    });
    write_rows(path, &DIST_COLUMNS, rows)
}

pub fn write_model_csv(path: &Path, curves: &[ModelCurve]) -> Result<(), CliError> {
    let mut header = vec!["t"];
    header.extend(curves.iter().map(|c| c.label()));
    let times = curves.first().map(|c| c.times.clone()).unwrap_or_default();
    let rows = times.iter().enumerate().map(|(i, &t)| {
        let mut row = vec![fmt_num(t)];
        row.extend(curves.iter().map(|c| fmt_num(c.values[i])));
        row
    });
    write_rows(path, &header, rows)
}

/// A CSV file held as header plus string rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let header = r
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect());
        }
        Ok(Table { header, rows })
    }

    /// Parses column `name`; empty fields become `None`.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>, CliError> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                parse_num(&row[idx]).map_err(|e| CliError::Input(format!("row {}, column `{name}`: {e}", i + 2)))
            })
            .collect()
    }

    /// Parses column `name`, rejecting empty fields.
    pub fn dense_column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        self.column(name)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| CliError::Input(format!("row {}, column `{name}`: empty field", i + 2))))
            .collect()
    }
}

/// Reads one histogram column of a `dist_t<k>.csv` file.
pub fn read_distribution(path: &Path, column: &str) -> Result<MomentumDistribution, CliError> {
    let table = Table::read(path)?;
    let centers = table.dense_column(DIST_COLUMNS[0])?;
    let probs = table.dense_column(column)?;
    if centers.len() < 2 {
        return Err(CliError::Input(format!("{}: need at least two bins", path.display())));
    }
    let width = centers[1] - centers[0];
    let uniform = centers
        .windows(2)
        .all(|w| ((w[1] - w[0]) - width).abs() <= 1e-9 * width.abs().max(1.0));
    if !(width > 0.0) || !uniform {
        return Err(CliError::Input(format!("{}: bin centres must be evenly spaced and increasing", path.display())));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(CliError::Input(format!("{}: probabilities must be finite and non-negative", path.display())));
    }
    MomentumDistribution::from_bins(&centers, probs, width).map_err(|e| CliError::Input(e.to_string()))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash over the sorted `(name, digest)` list, independent of timestamps.
pub fn content_hash(files: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (name, digest) in files {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(digest.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

pub fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Record of one `simulate` run, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    pub command: String,
    pub params: SimParams,
    pub bin_width: f64,
    /// Requested worker threads; 0 means one per core. Outputs do not depend on it.
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub duration_seconds: f64,
    pub total_spontaneous_emissions: u64,
    /// SHA-256 of every output file, keyed by file name.
    pub files: BTreeMap<String, String>,
    pub content_hash: String,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Input(e.to_string()))?;
        text.push('\n');
        let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}
