use std::path::Path;
use std::process::Command;

use quillen::spectral_engine::epstein_log_det;
use serde_json::Value;

fn quillen(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_quillen"))
        .args(args)
        .current_dir(dir)
        .env_remove("QUILLEN_OUTPUT")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn det_on_flat_square_matches_lattice_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = quillen(tmp.path(), &["det", "--flat", "--output", "det"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("det"));
    let r = &s["summary"]["result"];
    for key in ["metric_id", "method", "log_det", "error_estimate", "kernel_dim", "N", "tau"] {
        assert!(!r[key].is_null(), "{key}");
    }
    let oracle = epstein_log_det(num_complex::Complex64::new(0.0, 1.0), 1.0).log_det;
    assert!((r["log_det"].as_f64().unwrap() - oracle).abs() < 1e-6);
    assert_eq!(s["config"]["torus"]["N"], 32);
    assert!(tmp.path().join("det/phi.bin").exists());
}

#[test]
fn bad_resolution_is_a_config_error_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = quillen(tmp.path(), &["det", "--grid", "30", "--output", "bad"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("bad").exists());
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn missing_field_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = quillen(tmp.path(), &["det", "--field", "nope.bin"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_chern_reports_small_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    let out = quillen(
        tmp.path(),
        &["verify-chern", "--n", "2", "--trials", "100", "--seed", "7", "--output", "vc"],
    );
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&tmp.path().join("vc"));
    let r = &s["summary"]["report"]["max_residuals"];
    assert!(r["derivative_fd"].as_f64().unwrap() < 1e-8);
    assert_eq!(s["config"]["chern"]["trials"], 100);
}

#[test]
fn admissibility_failure_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"torus": {"N": 16}, "seed": 3,
        "field_source": {"random": {"max_frequency": 2, "amplitude": 0.2}},
        "flow": {"kind": "ricci_potential", "t_end": 0.5, "admissibility_floor": 0.9}}"#;
    std::fs::write(tmp.path().join("cfg.json"), cfg).unwrap();
    let out = quillen(tmp.path(), &["flow", "--config", "cfg.json", "--output", "adm"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!tmp.path().join("adm").exists());
}

#[test]
fn kenergy_between_field_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for (name, seed) in [("a", "1"), ("b", "2")] {
        let out = quillen(
            dir,
            &["det", "--grid", "16", "--max-frequency", "2", "--amplitude", "0.1", "--seed", seed, "--output", name],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    let out = quillen(
        dir,
        &["kenergy", "--grid", "16", "--field", "a/phi.bin", "--target", "b/phi.bin", "--output", "ke"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir.join("ke"));
    for key in ["value", "quadrature_error", "c_n"] {
        assert!(s["summary"][key].is_number(), "{key}");
    }
}

#[test]
fn output_directory_override() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_quillen"))
        .args(["verify-chern", "--n", "1", "--trials", "3", "--output", "ignored"])
        .current_dir(tmp.path())
        .env("QUILLEN_OUTPUT", "chosen")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("chosen/summary.json").exists());
    assert!(!tmp.path().join("ignored").exists());
}
