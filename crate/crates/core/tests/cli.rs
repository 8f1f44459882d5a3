//! Command-line round trips through a temporary directory.

use std::path::Path;
use std::process::{Command, Output};

use mosaic::experiment::EvalReport;
use mosaic::sampler::MosaicSamples;

fn mosaic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mosaic")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = mosaic(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

const CONFIG: &str = r#"{
    "truth": {"mu_range": [4, 5], "sigma_diag_range": [1, 1.5], "p": 3, "n": 2000, "link": "rounded_gaussian"},
    "chain": {"iterations": 300, "burn_in": 100, "thin": 2, "tile_strategy": "laplace"},
    "damcmc": {"iterations": 300, "burn_in": 100, "thin": 2},
    "seed": 4
}"#;

#[test]
fn simulate_fit_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), CONFIG).unwrap();
    ok(d, &["simulate", "--config", "cfg.json", "--out", "data.csv", "--truth", "truth.json"]);
    ok(d, &["fit", "--data", "data.csv", "--config", "cfg.json", "--out", "s.csv", "--diag", "diag.json"]);
    ok(d, &["eval", "--samples", "s.csv", "--truth", "truth.json", "--corrected", "--out", "r.json"]);

    let samples = MosaicSamples::read_csv(d.join("s.csv")).unwrap();
    assert_eq!((samples.p, samples.len()), (3, 100));
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert!(report.corrected && report.coverage_reliable);
    for g in ["rho", "s", "mu"] {
        assert!(report.mse[g] < 0.01, "{g}: {}", report.mse[g]);
    }
    let diag: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("diag.json")).unwrap()).unwrap();
    assert_eq!(diag["method"], "mosaic");

    ok(d, &["fit", "--method", "damcmc", "--init-truth", "truth.json", "--data", "data.csv", "--config", "cfg.json", "--out", "da.csv"]);
    assert_eq!(MosaicSamples::read_csv(d.join("da.csv")).unwrap().len(), 100);
}

#[test]
fn replicate_and_diagnostics_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), CONFIG).unwrap();
    ok(d, &["replicate", "--config", "cfg.json", "--reps", "2", "--out", "table.json"]);
    let table: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("table.json")).unwrap()).unwrap();
    assert_eq!(table["records"].as_array().unwrap().len(), 2);
    assert_eq!(table["summary"]["mosaic"]["report"]["replicate_count"], 2);

    ok(d, &["simulate", "--config", "cfg.json", "--out", "data.csv", "--truth", "truth.json"]);
    ok(d, &["diag", "fisher", "--config", "cfg.json", "--truth", "truth.json", "--mc-draws", "20000", "--out", "fisher.json"]);
    let fisher: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("fisher.json")).unwrap()).unwrap();
    assert_eq!(fisher["i12"].as_array().unwrap().len(), 3);

    ok(d, &["diag", "complexity", "--out", "timing.csv", "--bound-reps", "5"]);
    let timing = std::fs::read_to_string(d.join("timing.csv")).unwrap();
    assert!(timing.starts_with("sweep,k,n,seconds_per_eval"));
    assert_eq!(timing.lines().count(), 1 + 5 + 2);
}

#[test]
fn bad_inputs_fail_with_messages() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), CONFIG).unwrap();
    std::fs::write(d.join("neg.csv"), "y1,y2\n1,-2\n0,3\n").unwrap();
    let out = mosaic(d, &["fit", "--data", "neg.csv", "--out", "s.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = mosaic(d, &["eval", "--samples", "missing.csv", "--truth", "t.json", "--out", "r.json"]);
    assert!(!out.status.success());

    std::fs::write(d.join("bad.json"), r#"{"chain": {"iterations": 10, "burn_in": 20}}"#).unwrap();
    let out = mosaic(d, &["replicate", "--config", "bad.json", "--reps", "1", "--out", "t.json"]);
    assert!(!out.status.success());
}
