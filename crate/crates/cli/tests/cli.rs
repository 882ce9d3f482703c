use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn msl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msl")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn written(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

#[test]
fn pack_succeeds_and_writes_default_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("pack.toml");
    let out = msl(&["pack", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("packing"));
    assert_eq!(written(dir.path()), ["pack.json", "pack_meta.csv", "pack_packing.csv"]);
}

#[test]
fn format_flag_selects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("bounds.toml");
    let out = msl(&[
        "bounds",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(written(dir.path()), ["bounds_bounds.csv", "bounds_meta.csv", "bounds_terms.csv"]);
}

#[test]
fn unknown_format_is_a_usage_error() {
    let cfg = presets().join("pack.toml");
    let out = msl(&["pack", "--config", cfg.to_str().unwrap(), "--format", "xml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown format"));
}

#[test]
fn seed_and_reps_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("asymmetry.toml");
    let run = |seed: &str| {
        let out = msl(&[
            "asymmetry",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--format",
            "csv",
            "--reps",
            "50",
            "--seed",
            seed,
            "--threads",
            "1",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read_to_string(dir.path().join("asymmetry_learners.csv")).unwrap()
    };
    let a = run("1");
    assert!(a.lines().nth(1).unwrap().ends_with(",50"));
    assert_eq!(a, run("1"));
    assert_ne!(a, run("2"));
}

#[test]
fn missing_config_exits_with_config_error() {
    let out = msl(&["pack", "--config", "/nonexistent/pack.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/nonexistent/pack.toml"));
}

#[test]
fn malformed_config_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"pack\"\nbogus = 1\n").unwrap();
    let out = msl(&["pack", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn subcommand_must_match_the_config() {
    let cfg = presets().join("pack.toml");
    let out = msl(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("'pack'"), "{}", stderr(&out));
}

const MISDECLARED: &str = r#"
experiment = "rates"
replications = 5
procedures = ["pooled"]

[instance]
kind = "explicit"
beta = 1.0
class = { kind = "thresholds", lo = 0.0, hi = 1.0 }
target = { family = "threshold_family", hstar_cut = 0.5, marginal = { kind = "uniform", a = 0.0, b = 1.0 } }

[[instance.sources]]
n = 8
rho = 1.0
dist = { family = "threshold_family", hstar_cut = 0.5, marginal = { kind = "power_law", rho = 3.0, b = 1.0 } }

[sweep]
axis = "target_n"
grid = [8, 16, 32, 64]
"#;

#[test]
fn failing_assumptions_exit_three_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad_rho.toml");
    fs::write(&cfg, MISDECLARED).unwrap();
    let out_dir = dir.path().join("out");
    let base = ["rates", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    let out = msl(&base);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(!out_dir.exists());

    let mut forced = base.to_vec();
    forced.push("--force");
    let out = msl(&forced);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out_dir.join("rates_rows.csv").exists());

    let validate = fs::read_to_string(&cfg).unwrap().replace("experiment = \"rates\"", "experiment = \"validate\"");
    fs::write(&cfg, validate).unwrap();
    let out = msl(&["validate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    // one assumptions table per sweep point
    assert!(written(&out_dir).iter().any(|n| n.starts_with("validate_assumptions")));
}

#[test]
fn runtime_failures_exit_four() {
    // the output path is a regular file, so emitting fails after a successful run
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let cfg = presets().join("pack.toml");
    let out = msl(&["pack", "--config", cfg.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn validate_preset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("validate_pooling.toml");
    let out = msl(&["validate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}
