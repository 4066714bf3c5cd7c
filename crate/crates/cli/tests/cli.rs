use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn forge() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gevrey-forge"));
    c.env_remove("GEVREY_FORGE_CONFIG");
    c
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn params_for_one_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = forge().args(["--n", "1", "--m", "2", "--out"]).arg(dir.path()).arg("params").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("theta = 4/3"), "{text}");
    assert!(text.contains("gamma = 1/3"), "{text}");
    let doc = read_json(&dir.path().join("params.json"));
    assert_eq!(doc["result"]["params"]["s0"], "4/3");
}

#[test]
fn coeffs_oracle_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = forge().arg("--out").arg(dir.path()).arg("coeffs").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("delta oracle: 0 mismatches"));
}

#[test]
fn bad_config_exits_with_two() {
    for args in [&["--m", "0", "params"][..], &["--r1", "9", "params"], &["--precision-bits", "128", "params"], &["--n", "1/2", "params"]] {
        let out = forge().args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "unknown_key = 3\n").unwrap();
    let out = forge().arg("--config").arg(&cfg).arg("params").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let out = forge().args(["--n", "1", "--m", "2", "--out"]).arg(dir.path()).arg("greens").output().unwrap();
        assert!(out.status.success());
        let doc = read_json(&dir.path().join("greens.json"));
        (doc, std::fs::read(dir.path().join("greens.csv")).unwrap())
    };
    let (mut x, ca) = run();
    let (mut y, cb) = run();
    assert_eq!(x["content_id"], y["content_id"]);
    x.as_object_mut().unwrap().remove("meta");
    y.as_object_mut().unwrap().remove("meta");
    assert_eq!(x, y);
    assert_eq!(ca, cb);
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, format!("# test\nn = 2\nm = 3\nout = {}\n", dir.path().display())).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gevrey-forge")).env("GEVREY_FORGE_CONFIG", &cfg).arg("params").output().unwrap();
    assert!(out.status.success());
    let doc = read_json(&dir.path().join("params.json"));
    assert_eq!(doc["config"]["n"], 2);
    assert_eq!(doc["config"]["m"], 3);
    let over = forge().arg("--config").arg(&cfg).args(["--m", "1", "params"]).output().unwrap();
    assert!(over.status.success());
    assert_eq!(read_json(&dir.path().join("params.json"))["config"]["m"], 1);
}

#[test]
fn build_then_fourier_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = forge().args(["--lmax", "3", "--out"]).arg(dir.path()).arg("build").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("levels.bin").exists());
    assert!(dir.path().join("growth.csv").exists());
    let out = forge()
        .args(["--lmax", "3", "--out"])
        .arg(dir.path())
        .arg("fourier")
        .arg("--checkpoint")
        .arg(dir.path().join("levels.bin"))
        .output()
        .unwrap();
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    let doc = read_json(&dir.path().join("fourier.json"));
    assert!(doc["result"]["s_hat"].is_f64());
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("eta,log_abs_f,fit_residual\n"));
}
