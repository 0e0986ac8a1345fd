//! End-to-end runs of the `crsim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn crsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crsim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = crsim(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn device_derive_reports_zero_point_flux_and_coupling() {
    let o = crsim(&["device", "derive", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let phi = v["phi_zpf_phi0"].as_f64().unwrap();
    let g0 = v["g0_at_1p7_ghz_per_phi0_hz"].as_f64().unwrap();
    assert!((phi - 8.9e-6).abs() < 0.05 * 8.9e-6, "{phi}");
    assert!((g0 - 15e3).abs() < 0.05 * 15e3, "{g0}");
}

#[test]
fn malformed_device_names_file_and_key() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("device.json");
    fs::write(&path, r#"{"c_low": "big"}"#).unwrap();
    let o = crsim(&["--device", path.to_str().unwrap(), "device", "derive"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("device.json") && e.contains("c_low"), "{e}");
}

#[test]
fn malformed_trace_is_reported_with_its_line() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(&path, "freq_hz,re_s21,im_s21\n1e9,1,0\n2e9,x,0\n").unwrap();
    let o = crsim(&["fit", "resonance", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("t.csv") && e.contains("line 3") && e.contains("re_s21"), "{e}");
}

#[test]
fn simulated_crossing_fits_back() {
    let dir = tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = crsim(&["simulate", "crossing", "--seed", "3", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(files.len(), 41);

    let mut args = vec!["fit", "crossing", "--format", "json", "--input"];
    args.extend(files.iter().map(String::as_str));
    let o = crsim(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let g = v["params"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "g")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((g - 280e3).abs() < 0.02 * 280e3, "{g}");
}

#[test]
fn drive_window_far_from_resonance_fails_the_verdict() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let offsets: Vec<f64> = (0..41).map(|k| 50e6 + (k as f64 - 20.0) * 140e3).collect();
    fs::write(&cfg, serde_json::json!({"sweep": {"drive_offsets_hz": offsets}}).to_string()).unwrap();
    let out = out_arg(dir.path());
    let o = crsim(&["--config", cfg.to_str().unwrap(), "--out", &out, "pipeline", "fig3"]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig3_report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "rejected");
}

#[test]
fn pipeline_all_matches_separate_runs() {
    let all = tempdir().unwrap();
    let one = tempdir().unwrap();
    let o = crsim(&["pipeline", "all", "--seed", "5", "--out", &out_arg(all.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for id in ["fig2a", "fig2c", "fig3", "fig4"] {
        let o = crsim(&["pipeline", id, "--seed", "5", "--out", &out_arg(one.path())]);
        assert_eq!(o.status.code(), Some(0), "{id}: {}", stdout(&o));
        let name = format!("{id}_report.json");
        assert_eq!(
            fs::read(all.path().join(&name)).unwrap(),
            fs::read(one.path().join(&name)).unwrap(),
            "{name}"
        );
    }
}
