use std::path::Path;
use std::process::Command;

use atomic_mimo_harness::output::read_rows;
use atomic_mimo_harness::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_atomic-mimo"))
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert_eq!(seen, 8);
}

#[test]
fn run_writes_rows_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("beta.toml");
    std::fs::write(
        &cfg,
        "experiment = \"sweep_beta\"\nm = 16\nk = 3\nl = 3\np = 4\ngamma = 0.125\nsweep = [0.2, 0.8]\nmethods = [\"fsAD\", \"stPCP\"]\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let status = bin()
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--trials", "2", "--workers", "1"])
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_rows(&out.join("sweep_beta.csv")).unwrap();
    // 3 baselines + 2 solvers, 2 beta values, 2 trials
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.trial < 2));
    let summary = std::fs::read_to_string(out.join("sweep_beta_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 11);
}

#[test]
fn bad_config_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"sweep_alpha\"\nm = 10\np = 20\n").unwrap();
    let output = bin().args(["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]).output().unwrap();
    assert!(!output.status.success());
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());

    let missing = bin().args(["run", "/nonexistent/config.toml"]).output().unwrap();
    assert!(!missing.status.success());
}
