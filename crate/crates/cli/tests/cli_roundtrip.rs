//! Driver-level tests: config round-trips, validation guards, smoke runs,
//! reproducibility, and tamper detection through `verify`.

use std::fs;
use std::path::Path;

use glmm_cli::{mesh_cmd, parse_model_spec, run, verify, vortex_law, RunConfig};

fn smoke_config(dir: &Path) -> RunConfig {
    let text = format!(
        r#"
schema_version = 1

[geometry]
model = "flat_torus_2d"
parameter = 16

[family]
epsilons = [0.2]
n_r = 3
n_t = 8
seed = 7

[flow]
max_iters = 150

[diagnostics]
density = false
ellipticity = false

[output]
dir = "{}"
"#,
        dir.display()
    );
    RunConfig::from_toml_str(&text).unwrap()
}

#[test]
fn config_roundtrips_losslessly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke_config(tmp.path());
    let text = cfg.to_toml_string();
    let back = RunConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg, back);
    // and a second serialization is identical
    assert_eq!(text, back.to_toml_string());
}

#[test]
fn invalid_configs_rejected_before_compute() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let mut cfg = smoke_config(&out);
    cfg.family.epsilons = vec![-0.1];
    let err = run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(!out.exists(), "no artifacts may be created on validation errors");

    let mut cfg = smoke_config(&out);
    cfg.family.epsilons = vec![0.1, 0.2];
    assert_eq!(run(&cfg).unwrap_err().exit_code(), 1);

    let mut cfg = smoke_config(&out);
    cfg.geometry.model = "klein_bottle".into();
    assert_eq!(run(&cfg).unwrap_err().exit_code(), 1);
}

#[test]
fn smoke_run_produces_artifacts_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = smoke_config(&out);
    let dir = run(&cfg).unwrap();
    for f in [
        "config.toml",
        "mesh.txt",
        "sweepmap.txt",
        "spectral.txt",
        "summary.txt",
        "sweep.txt",
        "crit_eps0.txt",
        "hist_eps0.txt",
        "minmax_eps0.txt",
        "report_eps0.txt",
        "family_eps0/family.txt",
        "MANIFEST.txt",
    ] {
        assert!(dir.join(f).exists(), "missing artifact {f}");
    }
    let report = verify(&dir).unwrap();
    assert!(report.all_passed(), "verify failed:\n{}", report.render());
}

#[test]
fn identical_configs_give_byte_identical_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let mut cfg_a = smoke_config(&out_a);
    cfg_a.diagnostics.density = true;
    cfg_a.diagnostics.ellipticity = true;
    let mut cfg_b = cfg_a.clone();
    cfg_b.output.dir = out_b.display().to_string();
    let dir_a = run(&cfg_a).unwrap();
    let dir_b = run(&cfg_b).unwrap();
    let sum_a = fs::read(dir_a.join("summary.txt")).unwrap();
    let sum_b = fs::read(dir_b.join("summary.txt")).unwrap();
    assert_eq!(sum_a, sum_b, "summary tables differ between identical runs");
    let rep_a = fs::read(dir_a.join("report_eps0.txt")).unwrap();
    let rep_b = fs::read(dir_b.join("report_eps0.txt")).unwrap();
    assert_eq!(rep_a, rep_b);
}

#[test]
fn verify_detects_tampering_and_failure_markers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = smoke_config(&out);
    let dir = run(&cfg).unwrap();

    // corrupt the residual column of the summary (5th float column)
    let text = fs::read_to_string(dir.join("summary.txt")).unwrap();
    let mut lines: Vec<String> = text.lines().map(|s| s.to_string()).collect();
    let row = lines
        .iter()
        .position(|l| !l.starts_with('#') && !l.starts_with("eps "))
        .unwrap();
    let mut toks: Vec<String> = lines[row].split_whitespace().map(|s| s.to_string()).collect();
    toks[5] = "1.0000000000000000e-2".to_string();
    lines[row] = toks.join(" ");
    fs::write(dir.join("summary.txt"), lines.join("\n") + "\n").unwrap();

    let report = verify(&dir).unwrap();
    assert!(!report.all_passed());
    let failing: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    assert!(
        failing.iter().any(|n| n.starts_with("field_residual_matches")),
        "tampered residual not named: {failing:?}"
    );

    // a FAILED marker short-circuits with the stage name
    fs::write(dir.join("FAILED"), "stage min-max\nboom\n").unwrap();
    let report = verify(&dir).unwrap();
    assert!(!report.all_passed());
    assert_eq!(report.checks.len(), 1);
    assert!(report.checks[0].detail.contains("min-max"));
}

#[test]
fn model_specs_and_vortex_law() {
    assert!(parse_model_spec("sphere:3").is_ok());
    assert!(parse_model_spec("torus3d:16").is_ok());
    assert!(parse_model_spec("sphere").is_err());
    assert!(parse_model_spec("nonsense:3").is_err());

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("mesh.txt");
    let line = mesh_cmd("torus2d:8", &out).unwrap();
    assert!(line.contains("vertices=64"));
    assert!(out.exists());

    let (rows, slope, _) = vortex_law(&[1e-2, 1e-3], 1.0, 64).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((slope - std::f64::consts::PI).abs() < 0.01);
    assert!(vortex_law(&[1e-2], 1.0, 64).is_err());
}
