//! Experiment configuration: one TOML file per experiment.
//!
//! Only `agent` and `[scenario]` are required; every other table falls back
//! to its defaults, and each defaulted entry is logged at info level.

use std::path::{Path, PathBuf};

use gdmwifi_core::agent::{AgentHyper, AgentKind};
use gdmwifi_core::env::EnvConfig;
use gdmwifi_core::sim::{MacControls, MAX_AMPDU, MAX_CW_EXP};
use gdmwifi_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid value at `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentChoice {
    Gdm,
    Ddpg,
    BebStatic,
    GridOracle,
}

impl AgentChoice {
    pub const ALL: [AgentChoice; 4] = [AgentChoice::BebStatic, AgentChoice::GridOracle, AgentChoice::Ddpg, AgentChoice::Gdm];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentChoice::Gdm => "gdm",
            AgentChoice::Ddpg => "ddpg",
            AgentChoice::BebStatic => "beb-static",
            AgentChoice::GridOracle => "grid-oracle",
        }
    }

    /// The learning agent behind this choice, if any.
    pub fn learner(self) -> Option<AgentKind> {
        match self {
            AgentChoice::Gdm => Some(AgentKind::Gdm),
            AgentChoice::Ddpg => Some(AgentKind::Ddpg),
            _ => None,
        }
    }
}

/// Greedy evaluation run during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Station counts averaged into the evaluation score.
    pub densities: Vec<usize>,
    pub intervals: usize,
    /// Evaluation episodes per density; episode k resets with `seed + k`.
    pub episodes: u64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { densities: vec![10, 30, 50], intervals: 5, episodes: 1, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub densities: Vec<usize>,
    pub intervals: usize,
    pub seed: u64,
    /// A-MPDU length of the standard-BEB baseline.
    pub beb_ampdu: u32,
    pub grid_cw_exps: Vec<u32>,
    pub grid_ampdu_ns: Vec<u32>,
    /// Station count used by the stand-alone `grid-oracle` command.
    pub grid_n: usize,
    /// Explicit checkpoint per learning agent (`gdm`, `ddpg`). Missing
    /// entries use `<out_dir>/<agent>/seed-<first seed>/best.ckpt`.
    pub checkpoints: std::collections::BTreeMap<String, PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            densities: (1..=10).map(|k| 5 * k).collect(),
            intervals: 20,
            seed: 1,
            beb_ampdu: 32,
            grid_cw_exps: (4..=10).collect(),
            grid_ampdu_ns: (1..=MAX_AMPDU).collect(),
            grid_n: 30,
            checkpoints: Default::default(),
        }
    }
}

/// Homogeneous saturated fixed-CW grid checked against the analytical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticConfig {
    pub n: Vec<u32>,
    /// Window values `CW = 2^k - 1`.
    pub cw: Vec<u32>,
    pub ampdu_n: u32,
    pub phy_rate_mbps: f64,
    pub sim_time_us: f64,
    pub tolerance: f64,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self { n: vec![5, 10, 20, 30], cw: vec![15, 31, 63, 127], ampdu_n: 1, phy_rate_mbps: 600.0, sim_time_us: 2e6, tolerance: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_stations: usize,
    pub controls: MacControls,
    pub intervals: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { n_stations: 10, controls: MacControls::standard_beb(32), intervals: 10 }
    }
}

fn default_id() -> String {
    "experiment".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub agent: AgentChoice,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub scenario: EnvConfig,
    #[serde(default)]
    pub hyper: AgentHyper,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub analytic: AnalyticConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

impl ExperimentConfig {
    /// Everything defaulted around the given scenario and agent.
    pub fn new(agent: AgentChoice, scenario: EnvConfig) -> Self {
        Self {
            id: default_id(),
            agent,
            seeds: default_seeds(),
            out_dir: default_out_dir(),
            scenario,
            hyper: AgentHyper::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
            analytic: AnalyticConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.id.is_empty() {
            return Err(invalid("id", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        // TOML integers are signed 64-bit.
        if self.seeds.iter().any(|&s| s > i64::MAX as u64) {
            return Err(invalid("seeds", "seeds must be at most 2^63 - 1"));
        }
        self.scenario.validate().map_err(|e| invalid("scenario", e.to_string()))?;
        self.hyper.validate().map_err(|e| invalid("hyper", e.to_string()))?;
        if self.train.updates_per_step == 0 {
            return Err(invalid("train.updates_per_step", "must be >= 1"));
        }
        if self.eval.densities.iter().any(|&n| n == 0) || self.eval.densities.is_empty() {
            return Err(invalid("eval.densities", "needs at least one positive station count"));
        }
        if self.eval.intervals == 0 || self.eval.episodes == 0 {
            return Err(invalid("eval", "intervals and episodes must be >= 1"));
        }
        let s = &self.sweep;
        if s.densities.iter().any(|&n| n == 0) || s.grid_n == 0 {
            return Err(invalid("sweep.densities", "station counts must be positive"));
        }
        if s.intervals == 0 {
            return Err(invalid("sweep.intervals", "must be >= 1"));
        }
        if !(1..=MAX_AMPDU).contains(&s.beb_ampdu) {
            return Err(invalid("sweep.beb_ampdu", format!("must be in 1..={MAX_AMPDU}")));
        }
        if let Some(e) = s.grid_cw_exps.iter().find(|&&e| !(1..=MAX_CW_EXP).contains(&e)) {
            return Err(invalid("sweep.grid_cw_exps", format!("exponent {e} outside 1..={MAX_CW_EXP}")));
        }
        if let Some(a) = s.grid_ampdu_ns.iter().find(|&&a| !(1..=MAX_AMPDU).contains(&a)) {
            return Err(invalid("sweep.grid_ampdu_ns", format!("{a} outside 1..={MAX_AMPDU}")));
        }
        for key in s.checkpoints.keys() {
            if key != "gdm" && key != "ddpg" {
                return Err(invalid(&format!("sweep.checkpoints.{key}"), "only gdm and ddpg take checkpoints"));
            }
        }
        let a = &self.analytic;
        if let Some(cw) = a.cw.iter().find(|&&cw| cw < 1 || !(cw + 1).is_power_of_two()) {
            return Err(invalid("analytic.cw", format!("{cw} is not of the form 2^k - 1")));
        }
        if a.n.contains(&0) {
            return Err(invalid("analytic.n", "station counts must be positive"));
        }
        if !(1..=MAX_AMPDU).contains(&a.ampdu_n) {
            return Err(invalid("analytic.ampdu_n", format!("must be in 1..={MAX_AMPDU}")));
        }
        if !(a.phy_rate_mbps.is_finite() && a.phy_rate_mbps > 0.0) {
            return Err(invalid("analytic.phy_rate_mbps", "must be positive"));
        }
        if !(a.sim_time_us.is_finite() && a.sim_time_us > 0.0) {
            return Err(invalid("analytic.sim_time_us", "must be positive"));
        }
        if !(a.tolerance.is_finite() && a.tolerance > 0.0) {
            return Err(invalid("analytic.tolerance", "must be positive"));
        }
        if self.simulate.n_stations == 0 || self.simulate.intervals == 0 {
            return Err(invalid("simulate", "n_stations and intervals must be >= 1"));
        }
        self.simulate.controls.validate().map_err(|e| invalid("simulate.controls", e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parse and validate configuration text. `origin` only labels errors.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig, ConfigError> {
    let parse_err = |e: toml::de::Error| ConfigError::Parse {
        path: origin.to_path_buf(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    };
    let config: ExperimentConfig = toml::from_str(text).map_err(parse_err)?;
    config.validate()?;
    let given: toml::Table = toml::from_str(text).map_err(parse_err)?;
    let full: toml::Table = toml::from_str(&config.to_toml()).expect("serialised configuration parses");
    for (key, value) in defaulted_entries(&given, &full, "") {
        log::info!("{key} not set, using default {value}");
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    parse_config(&text, path)
}

/// Entries present in `full` but absent from `given`. A missing table is
/// reported once rather than key by key.
pub fn defaulted_entries(given: &toml::Table, full: &toml::Table, prefix: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (key, value) in full {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (given.get(key), value) {
            (None, toml::Value::Table(_)) => out.push((path, "table".into())),
            (None, v) => out.push((path, v.to_string())),
            (Some(toml::Value::Table(g)), toml::Value::Table(f)) => out.extend(defaulted_entries(g, f, &path)),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "agent = \"gdm\"\n[scenario]\n";

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        parse_config(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_is_fully_defaulted() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c, ExperimentConfig::new(AgentChoice::Gdm, EnvConfig::default()));
        let given: toml::Table = toml::from_str(MINIMAL).unwrap();
        let full: toml::Table = toml::from_str(&c.to_toml()).unwrap();
        let keys: Vec<String> = defaulted_entries(&given, &full, "").into_iter().map(|(k, _)| k).collect();
        assert!(keys.contains(&"seeds".to_string()));
        assert!(keys.contains(&"hyper".to_string()));
        assert!(keys.contains(&"scenario.interval_us".to_string()));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("agent = \"gdm\"\n[scenario]\n[sweep]\ncw_exponent_max_typo = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cw_exponent_max_typo"), "{msg}");
        assert!(matches!(err, ConfigError::Parse { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn nested_unknown_key_is_named() {
        let err = parse("agent = \"gdm\"\n[scenario.sim]\nslot_time = 9\n").unwrap_err();
        assert!(err.to_string().contains("slot_time"), "{err}");
    }

    #[test]
    fn parse_error_reports_line() {
        let err = parse("agent = \"gdm\"\n\n[scenario]\ninterval_us = = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn missing_agent_is_an_error() {
        assert!(parse("[scenario]\n").unwrap_err().to_string().contains("agent"));
    }

    #[test]
    fn validation_names_the_field() {
        let err = parse("agent = \"ddpg\"\nseeds = []\n[scenario]\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { field, .. } if field == "seeds"), "{err:?}");
        let err = parse("agent = \"ddpg\"\n[scenario]\n[analytic]\ncw = [16]\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { field, .. } if field == "analytic.cw"), "{err:?}");
    }

    #[test]
    fn roster_variants_parse() {
        let text = "agent = \"beb-static\"\n[scenario.roster]\nkind = \"generated\"\nn_min = 3\nn_max = 9\n[scenario.roster.mix]\ntcp_fraction = 0.0\n";
        let c = parse(text).unwrap();
        assert_eq!(c.scenario.with_stations(4).unwrap().roster, {
            let mut mix = gdmwifi_core::env::StationMix::default();
            mix.tcp_fraction = 0.0;
            gdmwifi_core::env::Roster::Generated { n_min: 4, n_max: 4, mix }
        });
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            prop::sample::select(AgentChoice::ALL.to_vec()),
            prop::collection::vec(0..=i64::MAX as u64, 1..4),
            1u64..100_000,
            1e3f64..1e6,
            1usize..200,
            0.0f64..0.5,
            prop::collection::vec(1u32..64, 1..5),
            4u32..=10,
            1u32..=64,
        )
            .prop_map(|(agent, seeds, budget, interval, steps, per, ns, exp, ampdu)| {
                let mut c = ExperimentConfig::new(agent, EnvConfig::default());
                c.seeds = seeds;
                c.train.budget_steps = budget;
                c.scenario.interval_us = interval;
                c.scenario.steps_per_episode = steps;
                c.scenario.sim.per = per;
                c.analytic.n = ns;
                c.simulate.controls = MacControls::fixed(exp, ampdu);
                c.hyper.gdm.beta_max = 0.02 + per / 10.0;
                c
            })
    }

    proptest! {
        #[test]
        fn serialise_then_parse_round_trips(c in arb_config()) {
            let back = parse(&c.to_toml()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
