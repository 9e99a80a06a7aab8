//! Command-line front end: configuration, orchestration and run artifacts.
//!
//! [`execute`] runs one parsed command and writes its report to a caller
//! supplied sink, so the binary and the tests share one code path.

pub mod config;
pub mod error;
pub mod output;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qkr::analysis::{classical_diffusion, classify_distribution, fit_energy_curve, FitOptions, FitResult, ShapeVerdict};
use qkr::ensemble::run_ensemble_with;
use qkr::model::{self, CurveKind, ModelCurve, ModelSummary};
use qkr::ModelParams;
use serde::Serialize;
use serde_json::{Map, Value};

pub use config::Config;
pub use error::CliError;
use error::simulation_error;
use output::{fmt_num, RunManifest, ARTIFACT_VERSION};

#[derive(Debug, Parser)]
#[command(name = "qkr", version, about = "Kicked-rotor ensembles with spontaneous emission and quasimomentum filtering")]
pub struct Cli {
    /// Worker threads; 0 uses one per core. Never changes the outputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Rendering of the report printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one ensemble and write energy.csv, dist_t<k>.csv and manifest.json.
    Simulate(RunArgs),
    /// Run one ensemble per value of `[sweep] Pi`, each in its own directory.
    Sweep(RunArgs),
    /// Evaluate the rate-equation model and its characteristic times.
    #[command(allow_negative_numbers = true)]
    Model(ModelArgs),
    /// Fit (D_q, t_s) to the E_filtered column of an energy.csv.
    Fit(FitArgs),
    /// Classify a momentum histogram as exponential, gaussian or intermediate.
    Classify(ClassifyArgs),
    /// Standard-map diffusion of a classical ensemble.
    #[command(allow_negative_numbers = true)]
    Classical(ClassicalArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `[simulation] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
#[allow(non_snake_case)]
pub struct ModelArgs {
    /// Reads the `[model]` table; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for model.csv and model_summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "d-q")]
    pub D_q: Option<f64>,
    #[arg(long = "t-s")]
    pub t_s: Option<f64>,
    #[arg(long = "pi")]
    pub Pi: Option<f64>,
    #[arg(long = "delta")]
    pub Delta: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
#[allow(non_snake_case)]
pub struct FitArgs {
    pub energy_csv: PathBuf,
    /// Emission probability; defaults to the manifest.json next to the CSV.
    #[arg(long = "pi")]
    pub Pi: Option<f64>,
    /// Window width; defaults to the manifest.json next to the CSV.
    #[arg(long = "delta")]
    pub Delta: Option<f64>,
    /// Kick strength used for the starting guess `K^2/4`.
    #[arg(long = "k")]
    pub K: Option<f64>,
    /// Budget of model evaluations.
    #[arg(long)]
    pub max_evals: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub dist_csv: PathBuf,
    #[arg(long, value_enum, default_value_t = Column::Filtered)]
    pub column: Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Filtered,
    Unfiltered,
}

impl Column {
    fn header(self) -> &'static str {
        match self {
            Column::Filtered => "f_filtered",
            Column::Unfiltered => "f_unfiltered",
        }
    }
}

#[derive(Debug, Args)]
#[allow(non_snake_case)]
pub struct ClassicalArgs {
    #[arg(long = "k", default_value_t = 10.0)]
    pub K: f64,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub particles: usize,
    #[arg(long, default_value_t = 20_100_101)]
    pub seed: u64,
    /// Directory for classical.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs `cli` and writes its report to `out`. Returns the exit status.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", cli.threads)))?;
    let (report, code) = pool.install(|| -> Result<(Value, i32), CliError> {
        Ok(match &cli.command {
            Command::Simulate(a) => {
                let cfg = load_run_config(a)?;
                (to_value(&simulate(&cfg, &a.out, cli.threads)?), 0)
            }
            Command::Sweep(a) => {
                let cfg = load_run_config(a)?;
                (to_value(&sweep(&cfg, &a.out, cli.threads)?), 0)
            }
            Command::Model(a) => (model_cmd(a)?, 0),
            Command::Fit(a) => {
                let report = fit(a)?;
                let code = if report.fit.converged { 0 } else { 4 };
                (to_value(&report), code)
            }
            Command::Classify(a) => (to_value(&classify(&a.dist_csv, a.column)?), 0),
            Command::Classical(a) => (to_value(&classical(a)?), 0),
        })
    })?;
    render(&report, cli.format, out)?;
    Ok(code)
}

fn load_run_config(a: &RunArgs) -> Result<Config, CliError> {
    let mut cfg = Config::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.simulation.seed = seed;
    }
    Ok(cfg)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Non-finite numbers become the strings `inf`, `-inf` or `NaN`.
fn num_value(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(fmt_num(x)))
}

fn render(report: &Value, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("valid json");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("key,value\n");
            flatten("", report, &mut s);
            s
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn flatten(prefix: &str, v: &Value, s: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, s);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                let key = if prefix.is_empty() { i.to_string() } else { format!("{prefix}.{i}") };
                flatten(&key, v, s);
            }
        }
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => s.push_str(&format!("{prefix},{}\n", fmt_num(x))),
            _ => s.push_str(&format!("{prefix},{n}\n")),
        },
        Value::String(t) if t.contains(',') || t.contains('"') => {
            s.push_str(&format!("{prefix},\"{}\"\n", t.replace('"', "\"\"")))
        }
        Value::String(t) => s.push_str(&format!("{prefix},{t}\n")),
        Value::Bool(b) => s.push_str(&format!("{prefix},{b}\n")),
        Value::Null => s.push_str(&format!("{prefix},\n")),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Report printed by `simulate`.
#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct SimulateReport {
    pub out: String,
    pub Pi: f64,
    pub n_kicks: usize,
    pub final_E_unfiltered: f64,
    pub final_E_filtered: Option<f64>,
    pub final_detected: f64,
    pub total_spontaneous_emissions: u64,
    pub files: Vec<String>,
    pub content_hash: String,
}

/// Runs the ensemble of `cfg.simulation` and writes its artifacts to `dir`.
pub fn simulate(cfg: &Config, dir: &Path, threads: usize) -> Result<SimulateReport, CliError> {
    let sim = &cfg.simulation;
    let params = sim.sim_params();
    let started = SystemTime::now();
    let clock = Instant::now();
    let res = run_ensemble_with(&params, sim.bin_width).map_err(simulation_error)?;
    let duration = clock.elapsed().as_secs_f64();

    create_dir(dir)?;
    let mut names = vec!["energy.csv".to_string()];
    output::write_energy_csv(&dir.join(&names[0]), &res)?;
    for d in &res.distributions {
        let name = output::dist_file_name(d.kick);
        output::write_dist_csv(&dir.join(&name), d)?;
        names.push(name);
    }
    let mut files = BTreeMap::new();
    for name in &names {
        files.insert(name.clone(), output::sha256_file(&dir.join(name))?);
    }
    let content_hash = output::content_hash(&files);
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION,
        command: "simulate".into(),
        params: params.clone(),
        bin_width: sim.bin_width,
        threads,
        started_unix: output::unix_seconds(started),
        finished_unix: output::unix_seconds(SystemTime::now()),
        duration_seconds: duration,
        total_spontaneous_emissions: res.total_se,
        files,
        content_hash: content_hash.clone(),
    };
    manifest.write(&dir.join("manifest.json"))?;

    let last = res.mean_energy.len() - 1;
    Ok(SimulateReport {
        out: dir.display().to_string(),
        Pi: params.Pi,
        n_kicks: params.n_kicks,
        final_E_unfiltered: res.mean_energy[last],
        final_E_filtered: res.filtered_energy[last],
        final_detected: res.detected_fraction()[last],
        total_spontaneous_emissions: res.total_se,
        files: names,
        content_hash,
    })
}

/// Directory name used by `sweep` for one emission probability.
pub fn sweep_dir_name(pi: f64) -> String {
    format!("pi_{pi}")
}

/// Runs `simulate` once per `[sweep] Pi` value into `dir/pi_<value>`.
pub fn sweep(cfg: &Config, dir: &Path, threads: usize) -> Result<Vec<SimulateReport>, CliError> {
    if cfg.sweep.Pi.is_empty() {
        return Err(CliError::Config("sweep needs a non-empty `[sweep] Pi` list".into()));
    }
    cfg.sweep
        .Pi
        .iter()
        .map(|&pi| {
            let mut one = cfg.clone();
            one.simulation.Pi = pi;
            simulate(&one, &dir.join(sweep_dir_name(pi)), threads)
        })
        .collect()
}

/// Model parameters and horizon after applying flag overrides.
pub fn model_inputs(a: &ModelArgs) -> Result<(ModelParams, f64, f64), CliError> {
    let mut m = match &a.config {
        Some(path) => Config::load(path)?.model,
        None => config::ModelSection::default(),
    };
    m.D_q = a.D_q.unwrap_or(m.D_q);
    m.t_s = a.t_s.unwrap_or(m.t_s);
    m.Pi = a.Pi.unwrap_or(m.Pi);
    m.Delta = a.Delta.unwrap_or(m.Delta);
    m.horizon = a.horizon.unwrap_or(m.horizon);
    m.dt = a.dt.unwrap_or(m.dt);
    Ok((m.model_params()?, m.horizon, m.dt))
}

/// Summary block with infinities kept as `inf`.
pub fn summary_value(mp: &ModelParams, s: &ModelSummary) -> Value {
    let mut m = Map::new();
    m.insert("D_q".into(), num_value(mp.D_q));
    m.insert("t_s".into(), num_value(mp.t_s));
    m.insert("Pi".into(), num_value(mp.Pi));
    m.insert("Delta".into(), num_value(mp.Delta));
    m.insert("tau_s".into(), num_value(s.tau_s));
    m.insert("t1".into(), num_value(s.t1));
    m.insert("t2_exact".into(), num_value(s.t2_exact));
    m.insert("t2_approx".into(), num_value(s.t2_approx));
    m.insert("D_infty".into(), num_value(s.d_infty));
    m.insert("D_r".into(), num_value(s.d_r));
    m.insert("E_saturation".into(), num_value(s.e_saturation));
    Value::Object(m)
}

fn model_cmd(a: &ModelArgs) -> Result<Value, CliError> {
    let (mp, horizon, dt) = model_inputs(a)?;
    let summary = summary_value(&mp, &model::summary(&mp));
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let grid = model::time_grid(horizon, dt);
        let curves: Vec<ModelCurve> = CurveKind::ALL
            .iter()
            .map(|&k| ModelCurve::evaluate(k, &grid, &mp))
            .collect();
        output::write_model_csv(&dir.join("model.csv"), &curves)?;
        let path = dir.join("model_summary.json");
        let mut text = serde_json::to_string_pretty(&summary).expect("valid json");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(summary)
}

/// Report printed by `fit`.
#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct FitReport {
    pub source: String,
    pub Pi: f64,
    pub Delta: f64,
    #[serde(flatten)]
    pub fit: FitResult,
}

pub fn fit(a: &FitArgs) -> Result<FitReport, CliError> {
    let table = output::Table::read(&a.energy_csv)?;
    let trace = table.column("E_filtered")?;
    let manifest_path = a.energy_csv.with_file_name("manifest.json");
    let manifest = if a.Pi.is_none() || a.Delta.is_none() || a.K.is_none() {
        manifest_path.exists().then(|| RunManifest::read(&manifest_path)).transpose()?
    } else {
        None
    };
    let from_manifest = |name: &str, get: fn(&RunManifest) -> f64| {
        manifest
            .as_ref()
            .map(get)
            .ok_or_else(|| CliError::Input(format!("--{name} not given and no manifest.json next to the CSV")))
    };
    let pi = match a.Pi {
        Some(v) => v,
        None => from_manifest("pi", |m| m.params.Pi)?,
    };
    let delta = match a.Delta {
        Some(v) => v,
        None => from_manifest("delta", |m| m.params.Delta)?,
    };
    let mut opts = match a.K.or_else(|| manifest.as_ref().map(|m| m.params.K)) {
        Some(k) => FitOptions::for_kick_strength(k),
        None => FitOptions::default(),
    };
    if let Some(n) = a.max_evals {
        opts.max_evals = n;
    }
    let fit = fit_energy_curve(&trace, pi, delta, &opts).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(FitReport {
        source: a.energy_csv.display().to_string(),
        Pi: pi,
        Delta: delta,
        fit,
    })
}

/// Report printed by `classify`.
#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub source: String,
    pub column: Column,
    #[serde(flatten)]
    pub verdict: ShapeVerdict,
}

pub fn classify(path: &Path, column: Column) -> Result<ClassifyReport, CliError> {
    let dist = output::read_distribution(path, column.header())?;
    let verdict = classify_distribution(&dist).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(ClassifyReport {
        source: path.display().to_string(),
        column,
        verdict,
    })
}

/// Report printed by `classical`.
#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct ClassicalReport {
    pub K: f64,
    pub steps: usize,
    pub particles: usize,
    pub seed: u64,
    pub slope: f64,
    pub final_energy: f64,
}

pub fn classical(a: &ClassicalArgs) -> Result<ClassicalReport, CliError> {
    if !(a.K.is_finite() && a.K >= 0.0) {
        return Err(CliError::Input(format!("K must be finite and >= 0, got {}", a.K)));
    }
    if a.particles == 0 {
        return Err(CliError::Input("particles must be > 0".into()));
    }
    let trace = classical_diffusion(a.K, a.steps, a.particles, a.seed);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let rows = trace
            .energies
            .iter()
            .enumerate()
            .map(|(t, &e)| vec![t.to_string(), fmt_num(e)]);
        output::write_rows(&dir.join("classical.csv"), &["t", "E"], rows)?;
    }
    Ok(ClassicalReport {
        K: a.K,
        steps: a.steps,
        particles: a.particles,
        seed: a.seed,
        slope: trace.slope,
        final_energy: *trace.energies.last().expect("trace starts at step 0"),
    })
}
