use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_magpack"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const CONSERVE: &str = r#"{
  "experiment": "conserve",
  "field": {"name": "constant_a", "params": {"a": [0.3, -0.2]}},
  "packet": {"q": [0.3, -0.2], "p": [0.5, 0.3]},
  "eps": [0.1],
  "t_final": 1.0,
  "samples": 10
}"#;

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = bin()
            .args(["run", "--config"])
            .arg(configs().join("egorov_check.json"))
            .arg("--out")
            .arg(&out)
            .arg("--no-timing")
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        outputs.push(std::fs::read(out.join("egorov_check.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("# config_sha256="));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", CONSERVE);
    let out = bin().args(["run", "--config"]).arg(&ok).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS momentum drift"));

    // An impossible threshold turns the same run into a failed check.
    let strict = CONSERVE.replacen("\"samples\": 10", "\"samples\": 10, \"criteria\": {\"norm_drift\": 0.0, \"energy_drift\": -1.0}", 1);
    let strict = write(dir.path(), "strict.json", &strict);
    let out = bin().args(["run", "--config"]).arg(&strict).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));

    let broken = write(dir.path(), "broken.json", r#"{"experiment": "conserve"}"#);
    let out = bin().args(["run", "--config"]).arg(&broken).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = bin().args(["run", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 8);
}
