use std::path::Path;
use std::process::{Command, Output};

use soliton_forge_cli::report::to_json;
use soliton_forge_core::suite::{Check, SuiteReport};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_soliton-forge"));
    c.env_remove("SOLITON_FORGE_THREADS");
    c
}

fn run_with(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut c = bin();
    c.args(args);
    if let Some(text) = config {
        let path = dir.join("config.json");
        std::fs::write(&path, text).unwrap();
        c.arg("--config").arg(path);
    }
    c.output().unwrap()
}

fn report_of(out: &Output) -> SuiteReport {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const SCALED_LOG: &str = r#"{"n": 1, "k": 1, "profile": {"kind": "scaled_log"}, "checks": ["paper_suite"]}"#;

#[test]
fn scaled_log_suite_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_with(&["run"], Some(SCALED_LOG), dir.path());
    let b = run_with(&["run"], Some(SCALED_LOG), dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let report = report_of(&a);
    assert!(report.pass);
    assert_eq!(report.summary.len(), Check::ALL.len());
    for s in &report.summary {
        assert_eq!(s.passed + s.failed, report.records_for(s.check).count());
    }
}

#[test]
fn json_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&["run"], Some(SCALED_LOG), dir.path());
    let report = report_of(&out);
    let again = String::from_utf8(to_json(&report).unwrap()).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), again);
}

#[test]
fn report_echoes_the_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&["run", "--set", "grid.size=4"], Some(SCALED_LOG), dir.path());
    let report = report_of(&out);
    let mut expected: serde_json::Value = serde_json::from_str(SCALED_LOG).unwrap();
    expected["grid"] = serde_json::json!({"size": 4});
    assert_eq!(report.provenance.config, expected);
    assert_eq!(report.records_for(Check::Axioms).count(), 4);
}

#[test]
fn csv_has_one_row_per_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out").join("report.csv");
    let config = format!(
        r#"{{"n": 1, "profile": {{"kind": "log"}}, "checks": ["structure", "regularity"],
            "output": {{"path": {:?}, "format": "csv"}}}}"#,
        path.display().to_string()
    );
    let out = run_with(&["run", "--json"], Some(&config), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = report_of(&out);
    let mut rows = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rows.headers().unwrap().len(), 6);
    assert_eq!(rows.records().count(), report.records.len());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), report.records.len() + 1);
}

#[test]
fn log_profile_is_non_regular_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"n": 1, "k": 1, "profile": {"kind": "log"}, "checks": ["regularity"]}"#;
    let out = run_with(&["run"], Some(config), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = report_of(&out);
    assert_eq!(report.records.len(), 27);
    for r in &report.records {
        assert!(r.detail.starts_with("non-regular, k df(xi)+f^2 = "), "{}", r.detail);
        let value: f64 = r.detail.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(value.abs() <= 1e-6);
    }
}

#[test]
fn unattainable_tolerance_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&["paper-suite", "--tol", "1e-300"], Some(SCALED_LOG), dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = report_of(&out);
    assert!(!report.pass);
    assert!(report.failures().count() > 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("checks failed"));
}

#[test]
fn config_errors_exit_two_with_a_field_path() {
    let dir = tempfile::tempdir().unwrap();
    for (config, path) in [
        (r#"{"n": 1, "profile": {"kind": "log"}, "checks": ["axioms", "nope"]}"#, "checks[1]"),
        (r#"{"n": 1, "profile": {"kind": "log"}, "tolerances": {"jet_exact": -1}}"#, "tolerances.jet_exact"),
        (r#"{"n": 1, "profile": {"kind": "log"}, "grid": {"t": [-1, -2]}}"#, "grid"),
    ] {
        let out = run_with(&["run"], Some(config), dir.path());
        assert_eq!(out.status.code(), Some(2), "{config}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(&format!("{path}:")), "{err}");
    }
    let missing = bin().args(["run", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn subcommands_restrict_the_check_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&["verify-structure", "--point", "0.5,2,1"], Some(SCALED_LOG), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = report_of(&out);
    let checks: Vec<Check> = report.summary.iter().map(|s| s.check).collect();
    assert_eq!(checks, [Check::Axioms, Check::ClassFlags]);
    assert_eq!(report.records.len(), 2);
    assert_eq!(report.provenance.config["grid"]["points"], serde_json::json!([[0.5, 2.0, 1.0]]));
}

#[test]
fn expression_table_manifold() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "manifold": {
            "n": 1,
            "coordinates": ["x", "y", "t"],
            "metric": [["-exp(2*t)", 0, 0], [0, "exp(2*t)", 0], [0, 0, 1]],
            "phi": [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
            "xi": [0, 0, 1],
            "eta": [0, 0, 1],
            "potential": [0, 0, 2]
        },
        "grid": {"size": 6}
    }"#;
    let out = run_with(&["paper-suite"], Some(config), dir.path());
    let report = report_of(&out);
    assert!(report.summary_for(Check::CurvatureOracle).is_none());
    for c in [Check::Axioms, Check::CurvatureSymmetries, Check::TorseForming, Check::EinsteinLikeFit] {
        let s = report.summary_for(c).unwrap();
        assert_eq!(s.failed, 0, "{c}");
    }
    assert!(report.records_for(Check::TorseForming).all(|r| r.detail.starts_with("f = 2.0000000000")));
}

#[test]
fn text_format_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&["classify", "--set", "output.format=text", "--set", "grid.size=3"], Some(SCALED_LOG), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("worst residual"));
    assert!(text.contains("torse_forming"));
    assert!(text.trim_end().ends_with("result: PASS"));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, SCALED_LOG).unwrap();
    let out = bin()
        .args(["verify-structure", "--config"])
        .arg(&path)
        .env("SOLITON_FORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = bin()
        .args(["verify-structure", "--config"])
        .arg(&path)
        .env("SOLITON_FORGE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
