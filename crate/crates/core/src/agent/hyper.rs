use serde::{Deserialize, Serialize};

use super::AgentError;

/// Settings both agents share, so a comparison differs only in the actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharedHyper {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub polyak: f64,
}

impl Default for SharedHyper {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            gamma: 0.9,
            actor_lr: 1e-4,
            critic_lr: 3e-4,
            batch_size: 128,
            buffer_capacity: 50_000,
            polyak: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdmHyper {
    pub t_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub policy_delay: usize,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    /// Gaussian noise added to sampled actions when exploring. Off unless
    /// `additive_exploration` is set; the sampler's own noise explores.
    pub exploration_noise_std: f64,
    pub additive_exploration: bool,
}

impl Default for GdmHyper {
    fn default() -> Self {
        Self {
            t_steps: 5,
            beta_min: 1e-4,
            beta_max: 0.02,
            policy_delay: 2,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            exploration_noise_std: 0.1,
            additive_exploration: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgHyper {
    pub exploration_noise_std: f64,
}

impl Default for DdpgHyper {
    fn default() -> Self {
        Self { exploration_noise_std: 0.1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentHyper {
    pub shared: SharedHyper,
    pub gdm: GdmHyper,
    pub ddpg: DdpgHyper,
}

impl AgentHyper {
    pub fn validate(&self) -> Result<(), AgentError> {
        let s = &self.shared;
        let bad = |what: &str| Err(AgentError::Config(what.to_string()));
        if s.hidden.is_empty() || s.hidden.contains(&0) {
            return bad("shared.hidden needs at least one non-zero width");
        }
        if !(0.0..1.0).contains(&s.gamma) {
            return bad("shared.gamma must lie in [0, 1)");
        }
        if !(s.actor_lr > 0.0 && s.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if s.batch_size == 0 || s.buffer_capacity == 0 {
            return bad("shared.batch_size and shared.buffer_capacity must be >= 1");
        }
        if !(s.polyak > 0.0 && s.polyak <= 1.0) {
            return bad("shared.polyak must lie in (0, 1]");
        }
        let g = &self.gdm;
        if g.t_steps == 0 {
            return bad("gdm.t_steps must be >= 1");
        }
        if !(g.beta_min > 0.0 && g.beta_min <= g.beta_max && g.beta_max < 1.0) {
            return bad("gdm betas need 0 < beta_min <= beta_max < 1");
        }
        if g.policy_delay == 0 {
            return bad("gdm.policy_delay must be >= 1");
        }
        if g.target_noise_std < 0.0 || g.target_noise_clip < 0.0 || g.exploration_noise_std < 0.0 {
            return bad("noise scales must be non-negative");
        }
        if self.ddpg.exploration_noise_std < 0.0 {
            return bad("ddpg.exploration_noise_std must be non-negative");
        }
        Ok(())
    }
}
