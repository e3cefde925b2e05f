//! End-to-end smoke tests for the command-line binary: exit codes, artifact
//! layout, and flag overrides.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynbridge"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dynbridge-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(out_dir: &std::path::Path, experiment: &str) -> String {
    format!(
        r#"
[timechange]
family = "power"
gamma = 1.0
alpha = 0.3333333333333333
t_max = 4.0

[simulation]
dt_base = 1e-3
dt_min = 1e-7
drift_cap = 5.0
terminal_guard = 0.02
n_paths = 300
n_particles = 300

[run]
seed = 11
experiment = "{experiment}"
out_dir = "{}"
horizon = 1.0
"#,
        out_dir.display()
    )
}

#[test]
fn successful_run_exits_zero_and_writes_artifacts() {
    let dir = tempdir("ok");
    let config_path = dir.join("run.toml");
    fs::write(&config_path, small_config(&dir.join("out"), "hitting-dist")).unwrap();

    let output = bin().arg("--config").arg(&config_path).output().unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    // exactly one run directory with the standard artifact set
    let run_dirs: Vec<_> = fs::read_dir(dir.join("out")).unwrap().collect();
    assert_eq!(run_dirs.len(), 1);
    let run_dir = run_dirs[0].as_ref().unwrap().path();
    for artifact in ["manifest", "summary.txt", "reports.csv", "hitting.csv"] {
        assert!(run_dir.join(artifact).exists(), "missing {artifact}");
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn config_error_exits_two() {
    let dir = tempdir("bad");
    let config_path = dir.join("run.toml");
    fs::write(
        &config_path,
        small_config(&dir.join("out"), "hitting-dist").replace("alpha = 0.3", "alpha = 2.0 # "),
    )
    .unwrap();
    let output = bin().arg("--config").arg(&config_path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn missing_config_exits_two() {
    let output = bin().arg("--config").arg("/nonexistent.toml").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn seed_and_experiment_overrides_apply() {
    let dir = tempdir("override");
    let config_path = dir.join("run.toml");
    fs::write(&config_path, small_config(&dir.join("out"), "hitting-dist")).unwrap();
    let output = bin()
        .arg("--config")
        .arg(&config_path)
        .args(["--seed", "99", "--experiment", "validate-timechange"])
        .arg("--out")
        .arg(dir.join("other"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let run_dirs: Vec<_> = fs::read_dir(dir.join("other")).unwrap().collect();
    let run_dir = run_dirs[0].as_ref().unwrap().path();
    assert!(run_dir.to_string_lossy().ends_with("-s99"));
    assert!(run_dir.join("timechange.csv").exists());
    let _ = fs::remove_dir_all(&dir);
}
