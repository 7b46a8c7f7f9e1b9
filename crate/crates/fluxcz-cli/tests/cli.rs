use std::path::Path;
use std::process::{Command, Output};

fn fluxcz(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxcz")).arg("--out").arg(out).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn capnet_runs_and_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--stage", "capnet", "--preset", "si-grounded-main", "--override", "capnet.bound_threshold_khz=0.0", "--workers", "1"];
    assert_eq!(code(&fluxcz(a.path(), &args)), 0);
    assert_eq!(code(&fluxcz(b.path(), &args)), 0);
    for f in ["capnet.json", "capnet.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["stage"], "capnet");
    assert_eq!(m["workers"], 1);
}

#[test]
fn config_file_and_presets_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "presets = [\"si-grounded-main\"]\n[capnet]\nbound_threshold_khz = 0.0\n").unwrap();
    let o = fluxcz(dir.path(), &["--config", cfg.to_str().unwrap(), "--stage", "capnet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("capnet.csv").exists());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--stage", "bogus", "--preset", "table1-main"],
        vec!["--stage", "constants"],
        vec!["--stage", "constants", "--preset", "table1-main", "--override", "novalue"],
        vec!["--stage", "constants", "--preset", "table1-main", "--override", "truncation.d=5"],
        vec!["--stage", "constants", "--preset", "no-such-preset"],
        vec!["--stage", "lindblad", "--preset", "table1-main"],
        vec!["--stage", "capnet", "--preset", "table1-main"],
        vec!["--stage", "constants", "--config", "/nonexistent/run.toml"],
    ] {
        let o = fluxcz(dir.path(), &args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluxcz(dir.path(), &["--stage", "spectrum", "--preset", "table1-main", "--override", "circuit.fluxonium_a.basis_dim=20"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("basis underflow"));
}
