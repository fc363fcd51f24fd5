use std::path::Path;
use std::process::{Command, Output};

use gdmwifi_bench::results::{read_rows, AnalyticRow, ResultRow, ANALYTIC_COLUMNS, GRID_COLUMNS, RESULT_COLUMNS};
use gdmwifi_core::train::TelemetryRow;

const SMALL: &str = r#"
id = "cli"
agent = "gdm"
seeds = [3]

[scenario]
interval_us = 20000.0
steps_per_episode = 10

[train]
budget_steps = 40
warmup_steps = 10
eval_every = 20

[hyper.shared]
hidden = [8, 8]
batch_size = 8

[eval]
densities = [5]
intervals = 2

[sweep]
densities = [5, 10]
intervals = 2
grid_cw_exps = [6, 8]
grid_ampdu_ns = [16, 64]
grid_n = 6
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    write_named(dir, "exp.toml", text)
}

fn write_named(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn gdmwifi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdmwifi"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_analytic_single_station() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "agent = \"beb-static\"\n[scenario]\n[analytic]\nn = [1]\ncw = [15, 63]\nsim_time_us = 1e6\n");
    let out = gdmwifi(dir.path(), &["validate-analytic", "--config", cfg.to_str().unwrap(), "--tolerance", "0.01"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = dir.path().join("out/analytic.csv");
    assert_eq!(header(&csv), ANALYTIC_COLUMNS.join(","));
    let rows: Vec<AnalyticRow> = read_rows(&csv).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.rel_err < 0.01 && r.p == 0.0));
}

#[test]
fn validate_analytic_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "agent = \"beb-static\"\n[scenario]\n[analytic]\nn = [5]\ncw = [15]\nsim_time_us = 2e5\n");
    let out = gdmwifi(dir.path(), &["validate-analytic", "--config", cfg.to_str().unwrap(), "--tolerance", "1e-9"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(dir.path().join("out/analytic.csv").is_file());

    let empty = write_config(dir.path(), "agent = \"beb-static\"\n[scenario]\n[analytic]\nn = []\n");
    let out = gdmwifi(dir.path(), &["validate-analytic", "--config", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("empty"));
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "agent = \"gdm\"\n[scenario]\ncw_exponent_max_typo = 12\n");
    let out = gdmwifi(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cw_exponent_max_typo") && stderr(&out).contains(":3:"), "{}", stderr(&out));

    let out = gdmwifi(dir.path(), &["simulate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = gdmwifi(dir.path(), &["simulate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_budget_writes_initial_checkpoint_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("budget_steps = 40", "budget_steps = 0"));
    let out = gdmwifi(dir.path(), &["train", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let run = dir.path().join("out/gdm/seed-3");
    let telemetry = std::fs::read_to_string(run.join("telemetry.csv")).unwrap();
    assert_eq!(telemetry, format!("{}\n", TelemetryRow::HEADER.join(",")));
    assert!(run.join("best.ckpt").is_file());
    assert!(!run.join("final.ckpt").exists());
}

#[test]
fn training_is_reproducible_and_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let telemetry = |sub: &str| std::fs::read(dir.path().join(sub).join("gdm/seed-3/telemetry.csv")).unwrap();

    assert!(gdmwifi(dir.path(), &["train", "--config", cfg]).status.success());
    let first = telemetry("out");
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 41);
    let again = Command::new(env!("CARGO_BIN_EXE_gdmwifi"))
        .args(["train", "--config", cfg, "--out"])
        .arg(dir.path().join("again"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(again.status.success());
    assert_eq!(first, telemetry("again"));

    // The sweep needs both learners.
    let out = gdmwifi(dir.path(), &["sweep", "--config", cfg]);
    assert_eq!(out.status.code(), Some(1));
    let expected = dir.path().join("out/ddpg/seed-3/best.ckpt");
    assert!(stderr(&out).contains("ddpg") && stderr(&out).contains(expected.to_str().unwrap()), "{}", stderr(&out));

    let ddpg_cfg = write_named(dir.path(), "ddpg.toml", &SMALL.replace("agent = \"gdm\"", "agent = \"ddpg\""));
    assert!(gdmwifi(dir.path(), &["train", "--config", ddpg_cfg.to_str().unwrap()]).status.success());
    let out = gdmwifi(dir.path(), &["sweep", "--config", cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let sweep = dir.path().join("out/sweep.csv");
    assert_eq!(header(&sweep), RESULT_COLUMNS.join(","));
    let rows: Vec<ResultRow> = read_rows(&sweep).unwrap();
    // 4 agents x 2 densities x (mean, std).
    assert_eq!(rows.len(), 16);
    let svg = std::fs::read_to_string(dir.path().join("out/sweep.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);

    let out = gdmwifi(dir.path(), &["evaluate", "--config", cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Vec<ResultRow> = read_rows(&dir.path().join("out/eval_results.csv")).unwrap();
    assert!(rows.iter().all(|r| r.agent == "gdm" && r.seed == 3));
    let trained: Vec<ResultRow> = read_rows(&dir.path().join("out/train_results.csv")).unwrap();
    assert!(trained.iter().any(|r| r.metric == "final_eval_mbps" && r.agent == "ddpg"));
}

#[test]
fn grid_oracle_and_simulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = gdmwifi(dir.path(), &["grid-oracle", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let grid = dir.path().join("out/grid.csv");
    assert_eq!(header(&grid), GRID_COLUMNS.join(","));
    assert_eq!(std::fs::read_to_string(&grid).unwrap().lines().count(), 5);

    let out = gdmwifi(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--seed", "11"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let sim = std::fs::read_to_string(dir.path().join("out/simulate.csv")).unwrap();
    assert_eq!(sim.lines().next().unwrap(), "interval,throughput_mbps,collision_rate,idle_fraction,successes,collisions");
    assert_eq!(sim.lines().count(), 11);
}
