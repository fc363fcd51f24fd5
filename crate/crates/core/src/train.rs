//! Seeded off-policy training loop with periodic greedy evaluation and
//! per-step telemetry.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Action, Agent, AgentError, AgentHyper, AgentKind, DdpgAgent, GdmAgent, ReplayBuffer, Transition};
use crate::env::{EnvError, Environment};
use crate::nn::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Environment steps.
    pub budget_steps: u64,
    /// Leading steps with uniformly random actions and no updates.
    pub warmup_steps: u64,
    pub updates_per_step: u32,
    /// Evaluate every this many steps; 0 evaluates only at the end.
    pub eval_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { budget_steps: 5_000, warmup_steps: 500, updates_per_step: 1, eval_every: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub step: u64,
    pub episode: u64,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub eval_throughput_mbps: Option<f64>,
}

impl TelemetryRow {
    pub const HEADER: [&'static str; 5] = ["step", "episode", "actor_loss", "critic_loss", "eval_throughput_mbps"];

    pub fn record(&self) -> [String; 5] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.step.to_string(),
            self.episode.to_string(),
            opt(self.actor_loss),
            opt(self.critic_loss),
            opt(self.eval_throughput_mbps),
        ]
    }
}

/// Telemetry CSV: header, then one line per row. Floats use the shortest
/// round-tripping decimal form, so identical runs give identical bytes.
pub fn write_telemetry<W: Write>(rows: &[TelemetryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TelemetryRow::HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
#[error("training failed at step {step} (seed {seed}): {source}")]
pub struct TrainError {
    pub step: u64,
    pub seed: u64,
    #[source]
    pub source: EnvError,
}

pub struct TrainOutcome {
    pub telemetry: Vec<TelemetryRow>,
    /// Checkpoint with the highest evaluation score; the initial weights if
    /// no evaluation ran.
    pub best_checkpoint: Checkpoint,
    pub best_eval: Option<f64>,
    pub final_eval: Option<f64>,
}

/// Independent seed for a named stream of a run (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_ACT: u64 = 2;
const STREAM_UPDATE: u64 = 3;
const STREAM_EPISODE: u64 = 4;

/// Fresh agent with weights drawn from the run's init stream.
pub fn build_agent(kind: AgentKind, obs_dim: usize, hyper: AgentHyper, seed: u64) -> Result<Box<dyn Agent>, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT));
    Ok(match kind {
        AgentKind::Gdm => Box::new(GdmAgent::new(obs_dim, hyper, &mut rng)?),
        AgentKind::Ddpg => Box::new(DdpgAgent::new(obs_dim, hyper, &mut rng)?),
    })
}

/// Reset seed of the `episode`-th training episode.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    derive_seed(derive_seed(seed, STREAM_EPISODE), episode)
}

/// Train `agent` on `env` for `config.budget_steps` steps. `evaluate` scores
/// the current greedy policy; it runs every `eval_every` steps and at the end.
pub fn train(
    agent: &mut dyn Agent,
    env: &mut dyn Environment,
    evaluate: &mut dyn FnMut(&dyn Agent) -> Result<f64, EnvError>,
    config: &TrainConfig,
    hyper: &AgentHyper,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    let fail = |step: u64| move |source: EnvError| TrainError { step, seed, source };
    let mut act_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_ACT));
    let mut update_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_UPDATE));
    let mut buffer = ReplayBuffer::new(hyper.shared.buffer_capacity);
    let batch_size = hyper.shared.batch_size;

    let mut telemetry = Vec::with_capacity(config.budget_steps as usize);
    let mut best_checkpoint = agent.to_checkpoint();
    let mut best_eval: Option<f64> = None;
    let mut final_eval = None;
    if config.budget_steps == 0 {
        return Ok(TrainOutcome { telemetry, best_checkpoint, best_eval, final_eval });
    }

    let mut episode = 0;
    let mut obs = env.reset(episode_seed(seed, episode)).map_err(fail(0))?;
    for step in 1..=config.budget_steps {
        let action: Action = if step <= config.warmup_steps {
            [act_rng.random_range(-1.0..=1.0), act_rng.random_range(-1.0..=1.0)]
        } else {
            agent.act(&obs, &mut act_rng as &mut dyn RngCore, true).map_err(|e| fail(step)(e.into()))?
        };
        let out = env.step(action).map_err(fail(step))?;
        buffer.push(Transition {
            obs: std::mem::take(&mut obs),
            action,
            reward: out.reward,
            next_obs: out.obs.clone(),
            done: out.terminal,
        });

        let mut row = TelemetryRow { step, episode, actor_loss: None, critic_loss: None, eval_throughput_mbps: None };
        if step > config.warmup_steps && buffer.len() >= batch_size {
            for _ in 0..config.updates_per_step {
                let batch = buffer.sample(batch_size, &mut update_rng).expect("buffer holds a full batch");
                let losses = agent.train_step(&batch, &mut update_rng).map_err(|e| fail(step)(e.into()))?;
                row.critic_loss = Some(losses.critic);
                if losses.actor.is_some() {
                    row.actor_loss = losses.actor;
                }
            }
        }

        if out.done {
            episode += 1;
            obs = env.reset(episode_seed(seed, episode)).map_err(fail(step))?;
        } else {
            obs = out.obs;
        }

        let last = step == config.budget_steps;
        if last || (config.eval_every > 0 && step % config.eval_every == 0) {
            let score = evaluate(&*agent).map_err(fail(step))?;
            if !score.is_finite() {
                return Err(fail(step)(EnvError::Agent(AgentError::Numeric(format!("evaluation returned {score}")))));
            }
            row.eval_throughput_mbps = Some(score);
            if best_eval.is_none_or(|b| score > b) {
                best_eval = Some(score);
                best_checkpoint = agent.to_checkpoint();
            }
            if last {
                final_eval = Some(score);
            }
        }
        telemetry.push(row);
    }
    Ok(TrainOutcome { telemetry, best_checkpoint, best_eval, final_eval })
}
