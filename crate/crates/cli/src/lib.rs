//! Configuration-driven front end: build a manifold from a JSON document,
//! run the selected checks and serialize the report.

pub mod config;
pub mod report;

use std::path::Path;

use serde_json::Value;
use soliton_forge_core::suite::{run_suite, SuiteReport};

pub use config::{load_file, load_str, ConfigError, Format, LoadedConfig, RunConfig};
pub use report::emit_report;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SOLITON_FORGE_THREADS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] soliton_forge_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Runs a loaded configuration. The report echoes the effective document.
pub fn run(loaded: &LoadedConfig) -> Result<SuiteReport, RunError> {
    let plan = loaded.config.plan()?;
    Ok(run_suite(
        &plan.subject,
        &plan.grid,
        &plan.checks,
        plan.tolerances,
        loaded.document.clone(),
    )?)
}

pub fn exit_code(report: &SuiteReport) -> i32 {
    if report.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_output(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let io = |source| RunError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| ConfigError::invalid(THREADS_ENV, format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| ConfigError::invalid(THREADS_ENV, e))
}

/// Overrides equivalent to the `--tol` and `--point` flags.
pub fn flag_overrides(tol: Option<f64>, point: Option<&str>) -> Result<Vec<(String, Value)>, ConfigError> {
    let mut out = Vec::new();
    if let Some(t) = tol {
        for key in ["tolerances.jet_exact", "tolerances.refit_derivative"] {
            out.push((key.to_string(), serde_json::json!(t)));
        }
    }
    if let Some(p) = point {
        let coords = p
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::invalid("--point", format!("expected comma-separated numbers: {e}")))?;
        out.push(("grid.points".to_string(), serde_json::json!([coords])));
    }
    Ok(out)
}
