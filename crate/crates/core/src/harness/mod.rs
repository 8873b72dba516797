//! Batch experiment runner: config ingestion, orchestration, deterministic
//! CSV/SVG outputs and a checksummed manifest.
//!
//! Exit codes of [`HarnessError::exit_code`]: 2 for configuration and I/O
//! problems, 3 for numerical failures (which also leave a
//! `diagnostic.json` in the output directory).

mod config;
mod experiments;
mod output;
mod scenarios;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::json;

pub use config::{validate_file, ConfigError, Experiment, ExperimentConfig, GridSpec, McSizes, ObservationSpec, SCHEMA_VERSION};
pub use experiments::{run_experiment, ExperimentOutput, StageError};
pub use output::{sha256_hex, Cell, Manifest, OutputDir, OutputRecord, Plot, Table};
pub use scenarios::{builtin, builtin_scenarios, BuiltinScenario};

pub const CONFIG_COPY: &str = "config.json";
pub const MANIFEST: &str = "manifest.json";
pub const DIAGNOSTIC: &str = "diagnostic.json";

#[derive(Debug)]
pub enum HarnessError {
    Config(ConfigError),
    Io { path: PathBuf, message: String },
    Numerical { stage: String, error: crate::Error, diagnostic: Option<PathBuf> },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } => 2,
            HarnessError::Numerical { .. } => 3,
        }
    }
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "{e}"),
            HarnessError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            HarnessError::Numerical { stage, error, diagnostic } => {
                write!(f, "numerical failure in {stage}: {error}")?;
                if let Some(d) = diagnostic {
                    write!(f, " (details in {})", d.display())?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for HarnessError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub plots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { plots: true }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// Runs `config` and writes its outputs into `out`. The manifest is written
/// last and lists every other file with its SHA-256.
pub fn run(config: &ExperimentConfig, out: &Path, options: RunOptions) -> Result<Manifest, HarnessError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let mut dir = OutputDir::create(out).map_err(io_error(out))?;
    dir.write(CONFIG_COPY, &config.canonical_bytes()).map_err(io_error(out))?;
    let result = match run_experiment(config) {
        Ok(r) => r,
        Err(StageError { stage, error }) => {
            let path = out.join(DIAGNOSTIC);
            let doc = json!({
                "experiment": config.experiment.name(),
                "stage": stage,
                "error": error.to_string(),
                "error_debug": format!("{error:?}"),
                "root_seed": config.seed,
                "config_digest": config.digest(),
            });
            let written = std::fs::write(&path, serde_json::to_vec_pretty(&doc).expect("serializes")).is_ok();
            return Err(HarnessError::Numerical { stage, error, diagnostic: written.then_some(path) });
        }
    };
    for t in &result.tables {
        dir.write(&t.name, &t.to_csv()).map_err(io_error(out))?;
    }
    if options.plots {
        for p in &result.plots {
            dir.write(&p.name, p.to_svg().as_bytes()).map_err(io_error(out))?;
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment.name().to_string(),
        config_file: CONFIG_COPY.to_string(),
        config_digest: config.digest(),
        root_seed: config.seed,
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        outputs: dir.records().to_vec(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializes");
    bytes.push(b'\n');
    std::fs::write(out.join(MANIFEST), bytes).map_err(io_error(out))?;
    Ok(manifest)
}
