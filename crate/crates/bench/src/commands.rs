//! The subcommands, as library functions. Each `cmd_*` writes its artifacts
//! under the configured output directory; the helpers without the prefix do
//! the computation only.

use std::path::PathBuf;

use gdmwifi_core::agent::{agent_from_checkpoint, Agent, AgentKind};
use gdmwifi_core::analytic::{saturation_throughput, Airtime, BianchiInput};
use gdmwifi_core::env::{
    evaluate_controls, evaluate_policy, grid_optimal, EnvConfig, EnvError, Environment, GridResult, WlanEnv, OBS_DIM,
};
use gdmwifi_core::nn::Checkpoint;
use gdmwifi_core::sim::{cw_from_exp, Generation, MacControls, RateTable, Simulation, StationCfg};
use gdmwifi_core::train::{build_agent, train, write_telemetry, TrainOutcome};

use crate::config::{AgentChoice, ExperimentConfig};
use crate::error::BenchError;
use crate::plot::{line_plot, Series};
use crate::results::{append_rows, ensure_dir, write_rows, AnalyticRow, IntervalRow, ResultRow};

fn homogeneous(n: u32, rate: f64) -> Vec<StationCfg> {
    let rates = RateTable { wifi5_mbps: rate, wifi6_mbps: rate };
    StationCfg::homogeneous(n as usize, Generation::WiFi6, &rates)
}

/// Model against simulation for every `(n, CW)` pair of the analytic grid.
pub fn analytic_rows(cfg: &ExperimentConfig) -> Result<Vec<AnalyticRow>, BenchError> {
    let a = &cfg.analytic;
    if a.n.is_empty() || a.cw.is_empty() {
        return Err(BenchError::Usage("analytic grid is empty: give at least one n and one cw".into()));
    }
    let params = &cfg.scenario.sim;
    if params.per != 0.0 {
        return Err(BenchError::Usage("analytic validation needs scenario.sim.per = 0".into()));
    }
    let airtime = Airtime::from_sim(params, a.ampdu_n, a.phy_rate_mbps)?;
    let mut rows = Vec::new();
    for (i, &n) in a.n.iter().enumerate() {
        for (j, &cw) in a.cw.iter().enumerate() {
            let model = saturation_throughput(&BianchiInput { n, w: cw + 1, m: 0, airtime })?;
            let seed = cfg.seeds[0].wrapping_add((i * a.cw.len() + j) as u64);
            let mut sim = Simulation::new(params.clone(), homogeneous(n, a.phy_rate_mbps), seed)?;
            let exp = (cw + 1).trailing_zeros();
            let stats = sim.run_interval(&MacControls::fixed(exp, a.ampdu_n), a.sim_time_us)?;
            let s_sim = stats.throughput_mbps()?;
            rows.push(AnalyticRow {
                n,
                w: cw + 1,
                m: 0,
                tau: model.tau,
                p: model.p,
                s_model_mbps: model.s_mbps,
                s_sim_mbps: s_sim,
                rel_err: (s_sim - model.s_mbps).abs() / model.s_mbps,
            });
        }
    }
    Ok(rows)
}

/// Writes `analytic.csv`, then fails if any point breaches the tolerance.
pub fn cmd_validate_analytic(cfg: &ExperimentConfig) -> Result<Vec<AnalyticRow>, BenchError> {
    let rows = analytic_rows(cfg)?;
    let path = ensure_dir(&cfg.out_dir)?.join("analytic.csv");
    write_rows(&path, &rows)?;
    let tol = cfg.analytic.tolerance;
    let breaches: Vec<&AnalyticRow> = rows.iter().filter(|r| !(r.rel_err <= tol)).collect();
    for r in &rows {
        log::info!("n={} W={} model {:.2} sim {:.2} rel_err {:.4}", r.n, r.w, r.s_model_mbps, r.s_sim_mbps, r.rel_err);
    }
    if let Some(worst) = breaches.iter().max_by(|a, b| a.rel_err.total_cmp(&b.rel_err)) {
        return Err(BenchError::Tolerance {
            breaches: breaches.len(),
            tolerance: tol,
            worst: worst.rel_err,
            at: format!("n={} W={}", worst.n, worst.w),
        });
    }
    Ok(rows)
}

/// Per-interval statistics of the scenario under fixed controls, written to
/// `simulate.csv`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Vec<IntervalRow>, BenchError> {
    let s = &cfg.simulate;
    let mut scenario = cfg.scenario.with_stations(s.n_stations)?;
    scenario.steps_per_episode = s.intervals;
    let mut env = WlanEnv::new(scenario)?;
    env.reset(cfg.seeds[0])?;
    let mut rows = Vec::with_capacity(s.intervals);
    for interval in 0..s.intervals {
        let out = env.step_controls(&s.controls)?;
        let stats = env.last_stats().expect("stats after a step");
        rows.push(IntervalRow {
            interval,
            throughput_mbps: out.metric,
            collision_rate: out.obs[1],
            idle_fraction: out.obs[2],
            successes: stats.successes,
            collisions: stats.collisions,
        });
    }
    write_rows(&ensure_dir(&cfg.out_dir)?.join("simulate.csv"), &rows)?;
    Ok(rows)
}

/// Score used for periodic evaluation during training: mean greedy
/// throughput over the evaluation densities and episodes.
pub fn training_eval_score(cfg: &ExperimentConfig, agent: &dyn Agent) -> Result<f64, EnvError> {
    let e = &cfg.eval;
    let mut total = 0.0;
    for &n in &e.densities {
        let scenario = cfg.scenario.with_stations(n)?;
        for k in 0..e.episodes {
            total += evaluate_policy(&scenario, agent, e.seed.wrapping_add(k), e.intervals)?.0;
        }
    }
    Ok(total / (e.densities.len() as u64 * e.episodes) as f64)
}

pub struct TrainRun {
    pub seed: u64,
    pub outcome: TrainOutcome,
    pub agent: Box<dyn Agent>,
}

/// Train one learner for one seed; no files are written.
pub fn train_run(cfg: &ExperimentConfig, kind: AgentKind, seed: u64) -> Result<TrainRun, BenchError> {
    let mut env = WlanEnv::new(cfg.scenario.clone())?;
    let mut agent = build_agent(kind, OBS_DIM, cfg.hyper.clone(), seed)?;
    let mut eval = |a: &dyn Agent| training_eval_score(cfg, a);
    let outcome = train(agent.as_mut(), &mut env, &mut eval, &cfg.train, &cfg.hyper, seed)?;
    Ok(TrainRun { seed, outcome, agent })
}

pub fn run_dir(cfg: &ExperimentConfig, kind: AgentKind, seed: u64) -> PathBuf {
    cfg.out_dir.join(kind.as_str()).join(format!("seed-{seed}"))
}

fn learner(cfg: &ExperimentConfig) -> Result<AgentKind, BenchError> {
    cfg.agent
        .learner()
        .ok_or_else(|| BenchError::Usage(format!("agent {} does not train; use gdm or ddpg", cfg.agent.as_str())))
}

fn save_checkpoint(ckpt: &Checkpoint, path: &std::path::Path) -> Result<(), BenchError> {
    ckpt.save(path).map_err(BenchError::from)
}

/// Train every configured seed. Per seed writes `telemetry.csv`,
/// `best.ckpt` and, when the budget is positive, `final.ckpt`; summary rows
/// go to `train_results.csv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    let kind = learner(cfg)?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        log::info!("training {} seed {seed} for {} steps", kind.as_str(), cfg.train.budget_steps);
        let run = train_run(cfg, kind, seed)?;
        let dir = ensure_dir(&run_dir(cfg, kind, seed))?;
        let telemetry = dir.join("telemetry.csv");
        let file = std::fs::File::create(&telemetry).map_err(BenchError::io(&telemetry))?;
        write_telemetry(&run.outcome.telemetry, file).map_err(BenchError::csv(&telemetry))?;
        save_checkpoint(&run.outcome.best_checkpoint, &dir.join("best.ckpt"))?;
        if cfg.train.budget_steps > 0 {
            save_checkpoint(&run.agent.to_checkpoint(), &dir.join("final.ckpt"))?;
        }
        let sim_time_us = cfg.train.budget_steps as f64 * cfg.scenario.interval_us;
        for (metric, value) in [("final_eval_mbps", run.outcome.final_eval), ("best_eval_mbps", run.outcome.best_eval)] {
            if let Some(value) = value {
                log::info!("{} seed {seed}: {metric} = {value:.2}", kind.as_str());
                rows.push(ResultRow {
                    experiment_id: cfg.id.clone(),
                    agent: kind.as_str().into(),
                    seed,
                    n_stations: 0,
                    metric: metric.into(),
                    value,
                    sim_time_us,
                });
            }
        }
    }
    append_rows(&ensure_dir(&cfg.out_dir)?.join("train_results.csv"), &rows)?;
    Ok(rows)
}

pub fn checkpoint_path(cfg: &ExperimentConfig, kind: AgentKind, seed: u64) -> PathBuf {
    cfg.sweep
        .checkpoints
        .get(kind.as_str())
        .cloned()
        .unwrap_or_else(|| run_dir(cfg, kind, seed).join("best.ckpt"))
}

pub fn load_agent(cfg: &ExperimentConfig, kind: AgentKind, seed: u64) -> Result<Box<dyn Agent>, BenchError> {
    let path = checkpoint_path(cfg, kind, seed);
    if !path.is_file() {
        return Err(BenchError::MissingCheckpoint { agent: kind.as_str().into(), path });
    }
    let agent = agent_from_checkpoint(&Checkpoint::load(&path)?)?;
    if agent.kind() != kind {
        return Err(BenchError::Usage(format!(
            "{} holds a {} agent, expected {}",
            path.display(),
            agent.kind().as_str(),
            kind.as_str()
        )));
    }
    Ok(agent)
}

/// Mean and spread of one agent's throughput at `n` stations under the
/// sweep protocol. Learners need `agent`; the grid oracle returns the best
/// cell and its spread.
pub fn evaluate_at(
    cfg: &ExperimentConfig,
    choice: AgentChoice,
    agent: Option<&dyn Agent>,
    n: usize,
) -> Result<(f64, f64), BenchError> {
    let s = &cfg.sweep;
    let scenario = cfg.scenario.with_stations(n)?;
    Ok(match choice {
        AgentChoice::BebStatic => evaluate_controls(&scenario, &MacControls::standard_beb(s.beb_ampdu), s.seed, s.intervals)?,
        AgentChoice::GridOracle => {
            let g = grid(&scenario, cfg)?;
            let cell = g.cells.iter().find(|c| MacControls::fixed(c.cw_exp, c.ampdu_n) == g.best).expect("best cell");
            (cell.mean_mbps, cell.std_mbps)
        }
        AgentChoice::Gdm | AgentChoice::Ddpg => {
            let agent = agent.ok_or_else(|| BenchError::Usage(format!("{} needs a trained agent", choice.as_str())))?;
            evaluate_policy(&scenario, agent, s.seed, s.intervals)?
        }
    })
}

fn grid(scenario: &EnvConfig, cfg: &ExperimentConfig) -> Result<GridResult, BenchError> {
    let s = &cfg.sweep;
    if s.grid_cw_exps.is_empty() || s.grid_ampdu_ns.is_empty() {
        return Err(BenchError::Usage("grid sets must be non-empty".into()));
    }
    Ok(grid_optimal(scenario, &s.grid_cw_exps, &s.grid_ampdu_ns, s.intervals, s.seed)?)
}

/// Throughput of one agent at every sweep density.
pub fn density_curve(
    cfg: &ExperimentConfig,
    choice: AgentChoice,
    agent: Option<&dyn Agent>,
) -> Result<Vec<(usize, f64, f64)>, BenchError> {
    cfg.sweep
        .densities
        .iter()
        .map(|&n| evaluate_at(cfg, choice, agent, n).map(|(m, s)| (n, m, s)))
        .collect()
}

fn curve_rows(cfg: &ExperimentConfig, choice: AgentChoice, seed: u64, curve: &[(usize, f64, f64)]) -> Vec<ResultRow> {
    let sim_time_us = cfg.sweep.intervals as f64 * cfg.scenario.interval_us;
    curve
        .iter()
        .flat_map(|&(n, mean, std)| {
            [("throughput_mbps", mean), ("throughput_std_mbps", std)].map(|(metric, value)| ResultRow {
                experiment_id: cfg.id.clone(),
                agent: choice.as_str().into(),
                seed,
                n_stations: n,
                metric: metric.into(),
                value,
                sim_time_us,
            })
        })
        .collect()
}

/// Evaluate the configured agent (every seed's checkpoint for learners) at
/// each sweep density; rows go to `eval_results.csv`.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    let mut rows = Vec::new();
    match cfg.agent.learner() {
        Some(kind) => {
            for &seed in &cfg.seeds {
                let agent = load_agent(cfg, kind, seed)?;
                rows.extend(curve_rows(cfg, cfg.agent, seed, &density_curve(cfg, cfg.agent, Some(agent.as_ref()))?));
            }
        }
        None => rows.extend(curve_rows(cfg, cfg.agent, cfg.sweep.seed, &density_curve(cfg, cfg.agent, None)?)),
    }
    append_rows(&ensure_dir(&cfg.out_dir)?.join("eval_results.csv"), &rows)?;
    Ok(rows)
}

/// All four agents over the sweep densities: rows to `sweep.csv` and a
/// throughput-versus-stations plot to `sweep.svg`. Learners are loaded from
/// their checkpoints first, so a missing one fails before any simulation.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    let seed = cfg.seeds[0];
    let gdm = load_agent(cfg, AgentKind::Gdm, seed)?;
    let ddpg = load_agent(cfg, AgentKind::Ddpg, seed)?;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for choice in AgentChoice::ALL {
        let agent = match choice {
            AgentChoice::Gdm => Some(gdm.as_ref()),
            AgentChoice::Ddpg => Some(ddpg.as_ref()),
            _ => None,
        };
        log::info!("sweeping {}", choice.as_str());
        let curve = density_curve(cfg, choice, agent)?;
        rows.extend(curve_rows(cfg, choice, cfg.sweep.seed, &curve));
        series.push(Series {
            label: choice.as_str().into(),
            points: curve.iter().map(|&(n, m, _)| (n as f64, m)).collect(),
        });
    }
    let dir = ensure_dir(&cfg.out_dir)?;
    append_rows(&dir.join("sweep.csv"), &rows)?;
    let svg = line_plot(&format!("{}: throughput vs stations", cfg.id), "stations", "throughput (Mbps)", &series);
    let svg_path = dir.join("sweep.svg");
    std::fs::write(&svg_path, svg).map_err(BenchError::io(&svg_path))?;
    Ok(rows)
}

/// Exhaustive fixed-CW grid at `sweep.grid_n` stations, written to `grid.csv`.
pub fn cmd_grid_oracle(cfg: &ExperimentConfig) -> Result<GridResult, BenchError> {
    let g = grid(&cfg.scenario.with_stations(cfg.sweep.grid_n)?, cfg)?;
    write_rows(&ensure_dir(&cfg.out_dir)?.join("grid.csv"), &g.cells)?;
    log::info!(
        "best at n={}: cw_exp {} (CW {}), ampdu {} -> {:.2} Mbps",
        cfg.sweep.grid_n,
        g.best.exp_bounds().0,
        cw_from_exp(g.best.exp_bounds().0),
        g.best.ampdu_n,
        g.best_mean_mbps
    );
    Ok(g)
}
