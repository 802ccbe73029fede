use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lorentz-zeta"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn missing_metric_is_a_config_error_with_a_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", "{\n  \"seed\": 3\n}\n");
    let out = bin().args(["curvature", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("metric") && err.contains("line"), "{err}");
}

#[test]
fn unknown_key_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "{\n  \"metric\": {\"family\": \"minkowski\", \"dimension\": 2},\n  \"sede\": 1\n}\n";
    let cfg = write(tmp.path(), "c.json", text);
    let out = bin().args(["curvature", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_flag_and_missing_file_exit_two() {
    let out = bin().args(["power", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eigenvalue_on_the_branch_cut_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
  "metric": {"family": "minkowski", "dimension": 2},
  "ambiguity": {"blocks": [{"eigenvalue": [0.0, 3.0], "size": 1}], "enclose": [[0.0, 3.0]], "background": 10}
}"#;
    let cfg = write(tmp.path(), "c.json", text);
    let out = bin().args(["ambiguity", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let payload: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert!(payload["error"].is_string());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("ambiguity.json");
    let mut hashes = Vec::new();
    for (k, threads) in ["1", "2"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{k}"));
        let out = bin().args(["ambiguity", "--config"]).arg(&cfg).arg("--out").arg(&dir).env("LORENTZ_ZETA_THREADS", threads).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        hashes.push(std::fs::read(dir.join("manifest.json")).unwrap());
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn manifest_lists_every_output_with_its_hash() {
    use sha2::{Digest, Sha256};
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out =
        bin().args(["zeta-flat", "--config"]).arg(configs().join("zeta_flat4.json")).arg("--out").arg(&dir).arg("--seed").arg("9").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir);
    assert_eq!(m["subcommand"], "zeta-flat");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["metric"]["dimension"], 4);
    let artifacts = m["artifacts"].as_array().unwrap();
    assert!(artifacts.len() >= 2);
    for a in artifacts {
        let bytes = std::fs::read(dir.join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
    }
    let csv = std::fs::read_to_string(dir.join("zeta_flat.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "alpha_re,alpha_im,value_re,value_im");
    assert_eq!(csv.lines().count(), 42);
}

#[test]
fn flow_overrides_and_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = bin()
        .args(["flow", "--config"])
        .arg(configs().join("bump2.json"))
        .arg("--out")
        .arg(&dir)
        .args(["--seeds", "8", "--tmax", "100"])
        .env("LORENTZ_ZETA_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let result: Value = serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(result["verdict"], "non_trapping");
    assert_eq!(manifest(&dir)["config"]["flow"]["seeds"], 8);
}

#[test]
fn in_process_entry_point_matches_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let cfg = configs().join("bump2.json");
    let args = ["lorentz-zeta", "curvature", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    assert_eq!(lorentz_zeta::cli::main_with_args(args), lorentz_zeta::cli::EXIT_OK);
    let csv = std::fs::read_to_string(dir.join("curvature.csv")).unwrap();
    assert!(csv.starts_with("x0,x1,R_g,sqrt_abs_det_g"));
}
