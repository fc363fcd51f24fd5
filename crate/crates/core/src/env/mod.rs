//! Environments the agents interact with.

mod bandit;
mod wlan;

pub use bandit::BanditEnv;
pub use wlan::{
    decode_action, encode_controls, evaluate_controls, evaluate_policy, grid_optimal, observation, EnvConfig,
    GridCell, GridResult, Roster, StationMix, WlanEnv, OBS_DIM,
};

use crate::agent::{Action, AgentError};
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("environment misuse: {0}")]
    Usage(String),
    #[error("invalid environment configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// True when the episode ended in a genuinely terminal state, as opposed
    /// to a time limit. Only terminal transitions stop value bootstrapping.
    pub terminal: bool,
    /// Quantity reported by evaluation: delivered throughput in Mbps for the
    /// WLAN, the raw reward for the bandit.
    pub metric: f64,
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError>;

    fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError>;
}
