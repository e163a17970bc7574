use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[grid_spectral]
n = 16

[hamiltonian_evolution]
dt = 0.01
T = 0.1

[output]
stride = 2
"#;

fn pauli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pauli")).args(args).output().expect("spawn pauli")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn run_small(dir: &Path, extra: &[&str]) -> Output {
    let config = write_config(dir, SMALL);
    let out = dir.join("out").display().to_string();
    let mut args = vec!["run", "--config", &config, "--out", &out];
    args.extend_from_slice(extra);
    pauli(&args)
}

#[test]
fn run_writes_artifacts_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run_small(tmp.path(), &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let out = tmp.path().join("out");
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,Q,E,uHu,H1_norm,Hs_norm"), "{header}");
    // t = 0, 0.02, ..., 0.1
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(out.join("snapshots/000000.pwf").exists());
    assert!(out.join("snapshots/000010.pwf").exists());

    let resolved = fs::read_to_string(out.join("resolved_config.toml")).unwrap();
    let table: toml::Table = resolved.parse().unwrap();
    assert_eq!(table["field_solver"]["tolerance"].as_float(), Some(1e-10));
    assert_eq!(table["output"]["stride"].as_integer(), Some(2));
    assert_eq!(table["hamiltonian_evolution"]["scheme"].as_str(), Some("rk4"));
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_small(a.path(), &["--seed", "4"]).status.success());
    assert!(run_small(b.path(), &["--seed", "4"]).status.success());
    let read = |d: &Path| fs::read(d.join("out/diagnostics.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn set_overrides_and_failing_gate_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    // an impossible charge budget must trip the gate
    let res = run_small(tmp.path(), &["--set", "diagnostics.charge_tolerance=1e-300"]);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    let gates = fs::read_to_string(tmp.path().join("out/gates.csv")).unwrap();
    assert!(gates.contains("charge_drift"), "{gates}");
}

#[test]
fn unknown_key_is_an_error_with_record() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &format!("{SMALL}\n[field_solver]\ntolerence = 1e-9\n"));
    let out = tmp.path().join("out").display().to_string();
    let res = pauli(&["run", "--config", &config, "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
    let record: toml::Table = fs::read_to_string(tmp.path().join("out/error.toml")).unwrap().parse().unwrap();
    assert_eq!(record["kind"].as_str(), Some("UnknownKey"));
    assert_eq!(record["key"].as_str(), Some("field_solver.tolerence"));
}

#[test]
fn missing_required_key_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[grid_spectral]\nn = 8\n[hamiltonian_evolution]\nT = 1.0\n");
    let out = tmp.path().join("out").display().to_string();
    let res = pauli(&["run", "--config", &config, "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
    let record: toml::Table = fs::read_to_string(tmp.path().join("out/error.toml")).unwrap().parse().unwrap();
    assert_eq!(record["kind"].as_str(), Some("MissingKey"));
    assert_eq!(record["key"].as_str(), Some("hamiltonian_evolution.dt"));
}

#[test]
fn verify_without_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v").display().to_string();
    let res = pauli(&[
        "verify",
        "--out",
        &out,
        "--seed",
        "9",
        "--set",
        "diagnostics.identity_sizes=[8]",
        "--set",
        "diagnostics.identity_samples=3",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(tmp.path().join("v/identities.csv").exists());
    assert!(tmp.path().join("v/resolved_config.toml").exists());
}
