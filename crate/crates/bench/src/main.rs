use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gdmwifi_bench::commands;
use gdmwifi_bench::config::load_config;
use gdmwifi_bench::error::BenchError;

/// Contention-window and aggregation experiments on a simulated 802.11 WLAN.
///
/// Log verbosity follows RUST_LOG (default `info`).
#[derive(Parser)]
#[command(name = "gdmwifi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run with this single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative tolerance for validate-analytic, overriding `analytic.tolerance`.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Per-interval statistics of the scenario under fixed controls.
    Simulate,
    /// Compare the simulator with the saturation model over the analytic grid.
    ValidateAnalytic,
    /// Train the configured learner for every seed.
    Train,
    /// Evaluate the configured agent at every sweep density.
    Evaluate,
    /// Evaluate all agents over the sweep densities and plot the result.
    Sweep,
    /// Exhaustive fixed-CW grid at `sweep.grid_n` stations.
    GridOracle,
}

fn run(cli: Cli) -> Result<(), BenchError> {
    let path = cli.config.ok_or_else(|| BenchError::Usage("--config <path> is required".into()))?;
    let mut cfg = load_config(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(tol) = cli.tolerance {
        cfg.analytic.tolerance = tol;
    }
    cfg.validate()?;
    match cli.command {
        Command::Simulate => {
            let rows = commands::cmd_simulate(&cfg)?;
            let mean = rows.iter().map(|r| r.throughput_mbps).sum::<f64>() / rows.len() as f64;
            log::info!("mean throughput {mean:.2} Mbps over {} intervals", rows.len());
        }
        Command::ValidateAnalytic => {
            let rows = commands::cmd_validate_analytic(&cfg)?;
            let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
            log::info!("{} points within tolerance; worst relative error {worst:.4}", rows.len());
        }
        Command::Train => {
            commands::cmd_train(&cfg)?;
        }
        Command::Evaluate => {
            commands::cmd_evaluate(&cfg)?;
        }
        Command::Sweep => {
            commands::cmd_sweep(&cfg)?;
        }
        Command::GridOracle => {
            commands::cmd_grid_oracle(&cfg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
