//! Off-policy actor-critic agents for a two-dimensional action in `[-1, 1]^2`.
//!
//! [`GdmAgent`] generates actions with a conditional denoising-diffusion
//! actor trained against twin delayed critics. [`DdpgAgent`] is the plain
//! DDPG baseline. Both consume the same [`ReplayBuffer`] batches and write
//! the same checkpoint layout, so runs differ only in the agent.

pub mod ddpg;
pub mod diffusion;
pub mod gdm;
mod hyper;
pub mod replay;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::nn::{Checkpoint, NnError, Tensor};

pub use ddpg::DdpgAgent;
pub use diffusion::{make_schedule, timestep_embedding, ChainNoise, DiffusionSchedule, GdmActor, EMBED_DIM};
pub use gdm::{CriticPair, GdmAgent};
pub use hyper::{AgentHyper, DdpgHyper, GdmHyper, SharedHyper};
pub use replay::{Batch, ReplayBuffer, Transition};

pub const ACTION_DIM: usize = 2;
pub type Action = [f64; ACTION_DIM];

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Gdm,
    Ddpg,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Gdm => "gdm",
            AgentKind::Ddpg => "ddpg",
        }
    }

    fn code(self) -> f64 {
        match self {
            AgentKind::Gdm => 1.0,
            AgentKind::Ddpg => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLosses {
    pub critic: f64,
    /// Present on steps where the actor was updated.
    pub actor: Option<f64>,
}

pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    fn obs_dim(&self) -> usize;

    /// Action for one observation. `explore` switches on the agent's
    /// exploration mechanism.
    fn act(&self, obs: &[f64], rng: &mut dyn RngCore, explore: bool) -> Result<Action, AgentError>;

    fn train_step(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<TrainLosses, AgentError>;

    fn to_checkpoint(&self) -> Checkpoint;
}

/// Rebuild whichever agent a checkpoint holds.
pub fn agent_from_checkpoint(ckpt: &Checkpoint) -> Result<Box<dyn Agent>, AgentError> {
    let code = ckpt.scalar("meta.kind")?;
    if code == AgentKind::Gdm.code() {
        Ok(Box::new(GdmAgent::from_checkpoint(ckpt)?))
    } else if code == AgentKind::Ddpg.code() {
        Ok(Box::new(DdpgAgent::from_checkpoint(ckpt)?))
    } else {
        Err(NnError::Checkpoint(format!("unknown agent kind code {code}")).into())
    }
}

pub(crate) fn obs_row(obs: &[f64]) -> Tensor {
    Tensor::new(vec![1, obs.len()], obs.to_vec()).expect("finite observation")
}

/// `mean((pred - target)^2)` and its gradient with respect to `pred`.
pub(crate) fn mse_with_grad(pred: &Tensor, target: &[f64]) -> (f64, Tensor) {
    let b = target.len() as f64;
    let mut grad = Tensor::zeros(vec![target.len(), 1]);
    let mut loss = 0.0;
    for (i, (&q, &y)) in pred.data().iter().zip(target).enumerate() {
        let d = q - y;
        loss += d * d;
        grad.data_mut()[i] = 2.0 * d / b;
    }
    (loss / b, grad)
}

pub(crate) fn check_finite(what: &str, v: f64) -> Result<f64, AgentError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(AgentError::Numeric(format!("{what} is {v}")))
    }
}

pub(crate) fn write_adam(ckpt: &mut Checkpoint, prefix: &str, adam: &crate::nn::AdamState) {
    ckpt.insert_all(&format!("{prefix}.m"), &adam.m);
    ckpt.insert_all(&format!("{prefix}.v"), &adam.v);
    ckpt.insert_u64(format!("{prefix}.step"), adam.step);
    ckpt.insert_scalar(format!("{prefix}.lr"), adam.lr);
    ckpt.insert_scalar(format!("{prefix}.beta1"), adam.beta1);
    ckpt.insert_scalar(format!("{prefix}.beta2"), adam.beta2);
    ckpt.insert_scalar(format!("{prefix}.eps"), adam.eps);
}

pub(crate) fn read_adam(ckpt: &Checkpoint, prefix: &str, count: usize) -> Result<crate::nn::AdamState, NnError> {
    Ok(crate::nn::AdamState {
        step: ckpt.u64(&format!("{prefix}.step"))?,
        m: ckpt.get_all(&format!("{prefix}.m"), count)?,
        v: ckpt.get_all(&format!("{prefix}.v"), count)?,
        lr: ckpt.scalar(&format!("{prefix}.lr"))?,
        beta1: ckpt.scalar(&format!("{prefix}.beta1"))?,
        beta2: ckpt.scalar(&format!("{prefix}.beta2"))?,
        eps: ckpt.scalar(&format!("{prefix}.eps"))?,
    })
}
