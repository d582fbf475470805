use std::fs;
use std::path::Path;
use std::process::Command;

use eqpert_cli::artifacts::field_csv;
use eqpert_cli::config::{validate, ExperimentConfig};
use eqpert_cli::{execute, run_and_write};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eqpert"))
}

fn small_gep(seed: u64) -> ExperimentConfig {
    toml::from_str(&format!(
        "experiment = \"gep-perturbation\"\nseed = {seed}\nreplicas = 4\nn = [64, 128]\nalpha = 0.25\nkappa = 0.2\ntimes = [0.05]\n"
    ))
    .unwrap()
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn runs_are_byte_identical_across_worker_counts() {
    let v = validate(&small_gep(11)).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_and_write(&v, 1, Some(a.path())).unwrap();
    run_and_write(&v, 3, Some(b.path())).unwrap();
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    assert!(fa.iter().any(|(n, _)| n == "manifest.json"));
    assert!(fa.iter().any(|(n, _)| n == "pairings.ndjson"));
    assert_eq!(fa, fb);
}

#[test]
fn different_seeds_give_different_pairings() {
    let x = execute(&validate(&small_gep(1)).unwrap(), 1).unwrap();
    let y = execute(&validate(&small_gep(2)).unwrap(), 1).unwrap();
    let json = |o: &eqpert_cli::Outcome| serde_json::to_string(o.artifacts.pairings()).unwrap();
    assert!(!x.artifacts.pairings().is_empty());
    assert_ne!(json(&x), json(&y));
}

#[test]
fn pairing_records_have_the_documented_fields() {
    let dir = tempfile::tempdir().unwrap();
    run_and_write(&validate(&small_gep(5)).unwrap(), 1, Some(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("pairings.ndjson")).unwrap();
    // 2 sizes × 3 test functions at one time.
    assert_eq!(text.lines().count(), 6);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["t", "N", "alpha", "kappa", "k", "phi_id", "value", "stderr"] {
        assert!(first.get(key).is_some(), "missing {key} in {first}");
    }
}

#[test]
fn empty_field_is_header_only() {
    assert_eq!(field_csv(&[]), "u,empirical,macroscopic,stderr\n");
}

#[test]
fn list_experiments_names_every_id() {
    let out = bin().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in eqpert_cli::ExperimentId::ALL {
        assert!(text.contains(id.name()), "{} missing", id.name());
    }
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "experiment = \"gep-perturbation\"\nalpha = 0.2\nkappa = 0.3\n").unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = bin().arg("validate").arg(dir.path().join("absent.toml")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn validate_prints_a_loadable_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.toml");
    fs::write(&path, "experiment = \"flow-audit\"\n").unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let again: ExperimentConfig = toml::from_str(&text).unwrap();
    let v = validate(&again).unwrap();
    assert_eq!(v.config.to_toml(), text);
}

#[test]
fn run_writes_manifest_and_exits_zero_on_pass() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.toml");
    fs::write(&path, "experiment = \"flow-audit\"\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = bin().arg("run").arg(&path).arg("-o").arg(&out_dir).env("EQPERT_WORKERS", "1").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    let text = manifest.to_string();
    assert!(text.contains("report.json") && text.contains("flow_costs.csv"), "{text}");
}

#[test]
fn bad_worker_count_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.toml");
    fs::write(&path, "experiment = \"flow-audit\"\n").unwrap();
    let out = bin().arg("run").arg(&path).env("EQPERT_WORKERS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
