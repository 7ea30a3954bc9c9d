use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rebound-alarm"))
}

fn desk() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("config/desk.toml")
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--config").arg(desk()).arg("--out").arg(out).args(args).output().unwrap()
}

#[test]
fn help_lists_every_verb() {
    let o = bin().arg("--help").output().unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    for verb in ["windows", "fit-all", "learn", "predict", "evaluate", "backtest", "report"] {
        assert!(text.contains(verb), "{verb} missing from help");
    }
    for flag in ["--config", "--seed", "--jobs", "--out"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn stage_out_of_order_exits_8() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["learn"]);
    assert_eq!(o.status.code(), Some(8));
    assert!(String::from_utf8_lossy(&o.stderr).contains("windows"));
}

#[test]
fn missing_config_exits_2() {
    let o = bin().args(["--config", "/nonexistent/cfg.toml", "windows"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[windows]\ndt1_step = -5\n").unwrap();
    let o = bin().arg("--config").arg(&cfg).arg("windows").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_prices_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[data]\nprices = \"absent.csv\"\n").unwrap();
    let o = bin().arg("--config").arg(&cfg).arg("windows").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn corrupt_fit_cache_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["windows"]).status.success());
    std::fs::write(dir.path().join("fits.jsonl"), "{not json\n").unwrap();
    assert_eq!(run(dir.path(), &["fit-all"]).status.code(), Some(4));
}

#[test]
fn full_run_writes_every_output_and_reuses_fits() {
    let dir = tempfile::tempdir().unwrap();
    for verb in ["windows", "fit-all", "learn", "predict", "evaluate", "backtest", "report"] {
        let o = run(dir.path(), &["--jobs", "2", verb]);
        assert!(o.status.success(), "{verb}: {}", String::from_utf8_lossy(&o.stderr));
        let _: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    }
    for f in [
        "windows.csv",
        "fits.jsonl",
        "fits.csv",
        "rebounds.csv",
        "informative.csv",
        "features_10_200.csv",
        "model.json",
        "alarm_10_200.csv",
        "leakage_audit.json",
        "error_diagram_10_200.csv",
        "bayes_10_200.csv",
        "trades_10_200_s1.csv",
        "strategy_10_200_s1.json",
        "report.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let again = run(dir.path(), &["fit-all"]);
    let v: serde_json::Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(v["new_fits"], 0);
    assert_eq!(v["windows"], 403);

    // a different seed is a different cache key
    let reseeded = run(dir.path(), &["--seed", "7", "fit-all"]);
    let v: serde_json::Value = serde_json::from_slice(&reseeded.stdout).unwrap();
    assert_eq!(v["new_fits"], 403);
}
