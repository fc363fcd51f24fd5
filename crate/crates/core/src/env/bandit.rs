use super::{EnvError, Environment, StepOutcome};
use crate::agent::Action;

/// Stateless bandit on the action square with reward `-|a - a*|^2`. Every
/// step is terminal, so the optimal action-value is the reward itself.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    pub optimum: Action,
}

impl BanditEnv {
    pub fn new(optimum: Action) -> Self {
        Self { optimum }
    }

    pub fn reward(&self, action: Action) -> f64 {
        -action.iter().zip(&self.optimum).map(|(a, o)| (a - o).powi(2)).sum::<f64>()
    }
}

impl Environment for BanditEnv {
    fn obs_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>, EnvError> {
        Ok(vec![1.0])
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        let reward = self.reward(action);
        Ok(StepOutcome { obs: vec![1.0], reward, done: true, terminal: true, metric: reward })
    }
}
