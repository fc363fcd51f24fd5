use std::path::PathBuf;

use gdmwifi_core::agent::AgentError;
use gdmwifi_core::analytic::AnalyticError;
use gdmwifi_core::env::EnvError;
use gdmwifi_core::nn::NnError;
use gdmwifi_core::sim::SimError;
use gdmwifi_core::train::TrainError;

use crate::config::ConfigError;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_TOLERANCE: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{breaches} point(s) exceed relative tolerance {tolerance}; worst {worst:.4} at {at}")]
    Tolerance { breaches: usize, tolerance: f64, worst: f64, at: String },
    #[error("no checkpoint for agent {agent} at {}", path.display())]
    MissingCheckpoint { agent: String, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl From<SimError> for BenchError {
    fn from(e: SimError) -> Self {
        BenchError::Env(e.into())
    }
}

fn sim_code(e: &SimError) -> u8 {
    match e {
        SimError::Config { .. } => EXIT_CONFIG,
        SimError::Domain(_) => EXIT_NUMERIC,
    }
}

fn agent_code(e: &AgentError) -> u8 {
    match e {
        AgentError::Numeric(_) | AgentError::Nn(NnError::Numeric(_)) => EXIT_NUMERIC,
        AgentError::Config(_) => EXIT_CONFIG,
        AgentError::Nn(_) => EXIT_OTHER,
    }
}

fn env_code(e: &EnvError) -> u8 {
    match e {
        EnvError::Sim(s) => sim_code(s),
        EnvError::Agent(a) => agent_code(a),
        EnvError::Usage(_) | EnvError::Config(_) => EXIT_CONFIG,
    }
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| BenchError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| BenchError::Csv { path, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) | BenchError::Usage(_) => EXIT_CONFIG,
            BenchError::Tolerance { .. } => EXIT_TOLERANCE,
            BenchError::Env(e) => env_code(e),
            BenchError::Train(t) => env_code(&t.source),
            BenchError::Agent(a) => agent_code(a),
            BenchError::Nn(NnError::Numeric(_)) => EXIT_NUMERIC,
            BenchError::Analytic(AnalyticError::Input(_)) => EXIT_CONFIG,
            BenchError::Analytic(AnalyticError::Numeric(_)) => EXIT_NUMERIC,
            BenchError::Analytic(AnalyticError::Sim(s)) => sim_code(s),
            BenchError::MissingCheckpoint { .. } | BenchError::Io { .. } | BenchError::Csv { .. } | BenchError::Nn(_) => {
                EXIT_OTHER
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let config = BenchError::Usage("empty grid".into());
        let tol = BenchError::Tolerance { breaches: 1, tolerance: 0.03, worst: 0.1, at: "n=5".into() };
        let numeric = BenchError::Train(TrainError {
            step: 3,
            seed: 1,
            source: EnvError::Agent(AgentError::Numeric("critic loss is NaN".into())),
        });
        let other = BenchError::MissingCheckpoint { agent: "gdm".into(), path: "x".into() };
        let codes = [config.exit_code(), tol.exit_code(), numeric.exit_code(), other.exit_code()];
        assert_eq!(codes, [EXIT_CONFIG, EXIT_TOLERANCE, EXIT_NUMERIC, EXIT_OTHER]);
        assert!(numeric.to_string().contains("step 3") && numeric.to_string().contains("seed 1"));
    }
}
