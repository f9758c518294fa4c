use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use soliton_forge_cli::config::{ConfigError, Group};
use soliton_forge_cli::report::{emit_report, to_json, to_text};
use soliton_forge_cli::{
    configure_threads, exit_code, flag_overrides, load_str, run, write_output, RunError, EXIT_CONFIG,
};

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file; omitted means an empty document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the JSON report on stdout.
    #[arg(long)]
    json: bool,
    /// Use one tolerance for every check.
    #[arg(long)]
    tol: Option<f64>,
    /// Run at a single point, given as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Override a configuration field, e.g. `--set profile.params.alpha=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Parser)]
#[command(name = "soliton-forge", version, about = "Verify almost contact B-metric structures and Ricci-like solitons")]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the checks listed in the configuration.
    Run(Common),
    /// Structure axioms and class flags.
    VerifyStructure(Common),
    /// Torse-forming potential, regularity and both fits.
    Classify(Common),
    /// Curvature against closed forms, symmetries and the vertical identities.
    CurvatureReport(Common),
    /// Fits, coefficient relations and the parallel tensor check.
    SolitonFit(Common),
    /// Every check.
    PaperSuite(Common),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (group, common) = match args.command {
        Sub::Run(c) => (None, c),
        Sub::VerifyStructure(c) => (Some(Group::Structure), c),
        Sub::Classify(c) => (Some(Group::Classification), c),
        Sub::CurvatureReport(c) => (Some(Group::Curvature), c),
        Sub::SolitonFit(c) => (Some(Group::Soliton), c),
        Sub::PaperSuite(c) => (Some(Group::PaperSuite), c),
    };
    match execute(group, &common) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(group: Option<Group>, common: &Common) -> Result<i32, RunError> {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return Ok(EXIT_CONFIG);
    }
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?,
        None => "{}".to_string(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(g) = group {
        overrides.push(format!("checks=[\"{}\"]", g.name()));
    }
    for (key, value) in flag_overrides(common.tol, common.point.as_deref())? {
        overrides.push(format!("{key}={value}"));
    }
    let loaded = load_str(&text, &overrides)?;
    let report = run(&loaded)?;
    let output = &loaded.config.output;
    let rendered = emit_report(&report, output.format).map_err(|source| RunError::Io {
        path: "<report>".into(),
        source,
    })?;
    let stdout_bytes = match &output.path {
        Some(path) => {
            write_output(path, &rendered)?;
            if common.json {
                to_json(&report).map_err(|e| RunError::Io {
                    path: "<stdout>".into(),
                    source: e.into(),
                })?
            } else {
                to_text(&report)
            }
        }
        None if common.json && output.format != soliton_forge_cli::Format::Json => {
            to_json(&report).map_err(|e| RunError::Io {
                path: "<stdout>".into(),
                source: e.into(),
            })?
        }
        None => rendered,
    };
    let mut out = std::io::stdout().lock();
    out.write_all(&stdout_bytes)
        .and_then(|_| out.flush())
        .map_err(|source| RunError::Io {
            path: "<stdout>".into(),
            source,
        })?;
    if !report.pass {
        let failed: Vec<String> = report
            .summary
            .iter()
            .filter(|s| s.failed > 0)
            .map(|s| format!("{} ({} failing)", s.check, s.failed))
            .collect();
        eprintln!("checks failed: {}", failed.join(", "));
    }
    Ok(exit_code(&report))
}
