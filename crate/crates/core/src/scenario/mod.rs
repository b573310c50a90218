//! Scenario orchestration: strict config parsing, seeded parallel execution,
//! CSV emission, and run manifests.
//!
//! A run is deterministic: for a fixed (config, seed) the CSV bytes are
//! identical across repeat runs and across worker counts. The manifest
//! written next to each CSV records the effective configuration, timings,
//! and the flagged-trajectory count; wall time naturally varies, so only the
//! CSV is the reproducible artifact.

pub mod config;
mod diagnose;
mod runners;
mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{
    canonical_example, EncodingName, ModelTable, NumericsTable, OutputTable, ProtocolTable,
    ScenarioConfig, ScenarioKind, DEFAULT_STEPS_PER_STAGE,
};
pub use diagnose::{diagnose, Diagnosis, DiagnosisRow};

use crate::error::{Error, Result};

/// Static catalogue of the shipped scenarios.
pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    ScenarioKind::all()
        .iter()
        .map(|k| (k.name(), k.description()))
        .collect()
}

/// Command-line / environment overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Base directory for relative output paths.
    pub out_dir: Option<PathBuf>,
}

/// Metadata written atomically alongside every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub non_finite_trajectories: usize,
    pub csv: String,
    pub rows: usize,
    pub config_echo: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

fn effective_config(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioConfig> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.numerics.seed = seed;
    }
    if let Some(workers) = opts.workers {
        cfg.numerics.workers = Some(workers);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_out_path(cfg: &ScenarioConfig, opts: &RunOptions, suffix: &str) -> PathBuf {
    let base = opts
        .out
        .clone()
        .or_else(|| cfg.output.path.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}{suffix}.csv", cfg.scenario)));
    match (&opts.out_dir, base.is_relative()) {
        (Some(dir), true) => dir.join(base),
        _ => base,
    }
}

fn with_pool<T: Send>(workers: Option<usize>, run: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(w) if w > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(run))
        }
        _ => Ok(run()),
    }
}

/// Write via a temp file and rename, so readers never observe partial files.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn manifest_path_for(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn execute(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
    suffix: &str,
    run: impl FnOnce(&ScenarioConfig) -> Result<runners::ScenarioResult> + Send,
) -> Result<RunOutput> {
    let cfg = effective_config(cfg, opts)?;
    let started = Instant::now();
    let result = with_pool(cfg.numerics.workers, || run(&cfg))??;
    let wall_time_seconds = started.elapsed().as_secs_f64();

    let csv_path = resolve_out_path(&cfg, opts, suffix);
    write_atomic(&csv_path, &result.table.to_csv())?;

    let manifest = RunManifest {
        scenario: cfg.scenario.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.numerics.seed,
        wall_time_seconds,
        non_finite_trajectories: result.non_finite,
        csv: csv_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        rows: result.table.rows(),
        config_echo: cfg.to_toml(),
    };
    let manifest_path = manifest_path_for(&csv_path);
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    write_atomic(&manifest_path, &manifest_json)?;
    Ok(RunOutput {
        csv_path,
        manifest_path,
        manifest,
    })
}

/// Run a scenario: one CSV row per grid point plus a manifest.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutput> {
    execute(cfg, opts, "", runners::dispatch)
}

/// Emit the exact-reference rows for a scenario (`source = oracle`).
pub fn run_oracle(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutput> {
    let opts = match (&opts.out, &cfg.output.path) {
        // keep oracle output from clobbering the scenario CSV named in the config
        (None, Some(path)) => {
            let mut renamed = opts.clone();
            let mut name = path.file_stem().map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| cfg.scenario.name().to_string());
            name.push_str("-oracle.csv");
            renamed.out = Some(path.with_file_name(name));
            renamed
        }
        _ => opts.clone(),
    };
    execute(cfg, &opts, "-oracle", runners::dispatch_oracle)
}
