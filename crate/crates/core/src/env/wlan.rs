use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, StepOutcome};
use crate::agent::{Action, Agent};
use crate::sim::{
    validate_stations, CwMode, Generation, IntervalStats, MacControls, RateTable, SimParams, Simulation, StationCfg,
    Traffic, FIXED_CW_EXP_RANGE, MAX_AMPDU,
};

pub const OBS_DIM: usize = 7;
const DENSITY_SCALE: f64 = 50.0;

/// How generated rosters are composed. Generation and traffic type are
/// spread evenly over station indices so a roster of size n is a prefix of
/// the roster of size n + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationMix {
    pub wifi6_fraction: f64,
    pub tcp_fraction: f64,
    pub saturated: bool,
    pub offered_load_mbps: f64,
    pub rates: RateTable,
}

impl Default for StationMix {
    fn default() -> Self {
        Self { wifi6_fraction: 0.5, tcp_fraction: 0.5, saturated: false, offered_load_mbps: 20.0, rates: RateTable::default() }
    }
}

impl StationMix {
    pub fn stations(&self, n: usize) -> Vec<StationCfg> {
        let picks = |frac: f64, i: usize| ((i + 1) as f64 * frac).floor() > (i as f64 * frac).floor();
        (0..n)
            .map(|i| {
                let generation = if picks(self.wifi6_fraction, i) { Generation::WiFi6 } else { Generation::WiFi5 };
                // Shifted by one station so traffic does not line up with generation.
                let tcp = picks(self.tcp_fraction, i + 1);
                StationCfg {
                    id: i as u32,
                    generation,
                    phy_rate_mbps: self.rates.rate(generation),
                    traffic: if tcp { Traffic::WindowedTcpLike } else { Traffic::SaturatedUdp },
                    saturated: self.saturated,
                    offered_load_mbps: if self.saturated { 0.0 } else { self.offered_load_mbps },
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Roster {
    Fixed { stations: Vec<StationCfg> },
    /// Station count drawn uniformly from `n_min..=n_max` at every reset.
    Generated {
        n_min: usize,
        n_max: usize,
        #[serde(default)]
        mix: StationMix,
    },
}

impl Default for Roster {
    fn default() -> Self {
        Roster::Generated { n_min: 5, n_max: 50, mix: StationMix::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub sim: SimParams,
    pub roster: Roster,
    pub interval_us: f64,
    pub steps_per_episode: usize,
    pub reward_norm_mbps: f64,
    /// A-MPDU length used during the BEB burn-in interval of a reset.
    pub burn_in_ampdu: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            sim: SimParams::default(),
            roster: Roster::default(),
            interval_us: 100_000.0,
            steps_per_episode: 50,
            reward_norm_mbps: 1000.0,
            burn_in_ampdu: 16,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.sim.validate()?;
        let positive = |name: &str, ok: bool| if ok { Ok(()) } else { Err(EnvError::Config(format!("{name} must be positive"))) };
        positive("interval_us", self.interval_us.is_finite() && self.interval_us > 0.0)?;
        positive("steps_per_episode", self.steps_per_episode > 0)?;
        positive("reward_norm_mbps", self.reward_norm_mbps.is_finite() && self.reward_norm_mbps > 0.0)?;
        if !(1..=MAX_AMPDU).contains(&self.burn_in_ampdu) {
            return Err(EnvError::Config(format!("burn_in_ampdu must be in 1..={MAX_AMPDU}")));
        }
        match &self.roster {
            Roster::Fixed { stations } => validate_stations(stations)?,
            Roster::Generated { n_min, n_max, mix } => {
                if *n_min == 0 || n_min > n_max {
                    return Err(EnvError::Config(format!("station range {n_min}..={n_max} is empty or starts at 0")));
                }
                if !(0.0..=1.0).contains(&mix.wifi6_fraction) || !(0.0..=1.0).contains(&mix.tcp_fraction) {
                    return Err(EnvError::Config("mix fractions must lie in [0, 1]".into()));
                }
                validate_stations(&mix.stations(*n_max))?;
            }
        }
        Ok(())
    }

    /// Same scenario pinned to `n` stations. A fixed roster is truncated or
    /// rejected if it is shorter than `n`.
    pub fn with_stations(&self, n: usize) -> Result<Self, EnvError> {
        let mut out = self.clone();
        out.roster = match &self.roster {
            Roster::Generated { mix, .. } => Roster::Generated { n_min: n, n_max: n, mix: mix.clone() },
            Roster::Fixed { stations } if stations.len() >= n && n > 0 => {
                Roster::Fixed { stations: stations[..n].to_vec() }
            }
            Roster::Fixed { stations } => {
                return Err(EnvError::Config(format!("fixed roster has {} stations, {n} requested", stations.len())))
            }
        };
        Ok(out)
    }
}

fn round_half_up(x: f64) -> i64 {
    // NaN casts to 0 and is then clamped like any other out-of-range value.
    (x + 0.5).floor() as i64
}

/// Map a raw action in `[-1, 1]^2` to fixed-CW controls. Out-of-range input
/// is clamped.
pub fn decode_action(raw: Action) -> MacControls {
    let (lo, hi) = FIXED_CW_EXP_RANGE;
    let r0 = raw[0].clamp(-1.0, 1.0);
    let r1 = raw[1].clamp(-1.0, 1.0);
    let cw_exp = round_half_up(lo as f64 + (hi - lo) as f64 * (r0 + 1.0) / 2.0).clamp(lo as i64, hi as i64);
    let ampdu = round_half_up(1.0 + (MAX_AMPDU - 1) as f64 * (r1 + 1.0) / 2.0).clamp(1, MAX_AMPDU as i64);
    MacControls::fixed(cw_exp as u32, ampdu as u32)
}

/// Inverse of [`decode_action`] on its grid points. BEB controls encode
/// their minimum exponent.
pub fn encode_controls(controls: &MacControls) -> Action {
    let (lo, hi) = FIXED_CW_EXP_RANGE;
    let exp = match controls.cw_mode {
        CwMode::Fixed { cw_exp } => cw_exp,
        CwMode::StandardBeb { cw_min_exp, .. } => cw_min_exp,
    }
    .clamp(lo, hi);
    [
        2.0 * f64::from(exp - lo) / f64::from(hi - lo) - 1.0,
        2.0 * f64::from(controls.ampdu_n.clamp(1, MAX_AMPDU) - 1) / f64::from(MAX_AMPDU - 1) - 1.0,
    ]
}

pub fn observation(
    n_stations: usize,
    stats: &IntervalStats,
    slot_us: f64,
    reward_norm_mbps: f64,
    prev_raw: Action,
) -> Result<Vec<f64>, EnvError> {
    let duration = stats.duration_us;
    let throughput = stats.throughput_mbps()?;
    let idle = (stats.idle_slots as f64 * slot_us / duration).clamp(0.0, 1.0);
    let busy = (stats.busy_us / duration).clamp(0.0, 1.0);
    Ok(vec![
        n_stations as f64 / DENSITY_SCALE,
        stats.collision_rate(),
        idle,
        busy,
        throughput / reward_norm_mbps,
        prev_raw[0],
        prev_raw[1],
    ])
}

pub struct WlanEnv {
    config: EnvConfig,
    sim: Option<Simulation>,
    steps: usize,
    last_stats: Option<IntervalStats>,
}

impl WlanEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self { config, sim: None, steps: 0, last_stats: None })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn n_stations(&self) -> Option<usize> {
        self.sim.as_ref().map(|s| s.stations().len())
    }

    /// Counters of the most recent interval (the burn-in right after a reset).
    pub fn last_stats(&self) -> Option<&IntervalStats> {
        self.last_stats.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.steps >= self.config.steps_per_episode
    }

    /// Run one interval under arbitrary controls. Used by the baselines,
    /// which bypass action decoding.
    pub fn step_controls(&mut self, controls: &MacControls) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::Usage("step called after the episode finished; call reset".into()));
        }
        let sim = self.sim.as_mut().ok_or_else(|| EnvError::Usage("step called before reset".into()))?;
        let stats = sim.run_interval(controls, self.config.interval_us)?;
        let n = sim.stations().len();
        let throughput = stats.throughput_mbps()?;
        let obs = observation(n, &stats, self.config.sim.slot_us, self.config.reward_norm_mbps, encode_controls(controls))?;
        self.steps += 1;
        self.last_stats = Some(stats);
        Ok(StepOutcome { obs, reward: throughput / self.config.reward_norm_mbps, done: self.is_done(), terminal: false, metric: throughput })
    }
}

impl Environment for WlanEnv {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stations = match &self.config.roster {
            Roster::Fixed { stations } => stations.clone(),
            Roster::Generated { n_min, n_max, mix } => mix.stations(rng.random_range(*n_min..=*n_max)),
        };
        let mut sim = Simulation::new(self.config.sim.clone(), stations, rng.next_u64())?;
        let burn_in = MacControls::standard_beb(self.config.burn_in_ampdu);
        let stats = sim.run_interval(&burn_in, self.config.interval_us)?;
        let obs = observation(
            sim.stations().len(),
            &stats,
            self.config.sim.slot_us,
            self.config.reward_norm_mbps,
            encode_controls(&burn_in),
        )?;
        self.sim = Some(sim);
        self.steps = 0;
        self.last_stats = Some(stats);
        Ok(obs)
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        self.step_controls(&decode_action(action))
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn evaluation_env(config: &EnvConfig, intervals: usize) -> Result<WlanEnv, EnvError> {
    if intervals == 0 {
        return Err(EnvError::Usage("evaluation needs at least one interval".into()));
    }
    let mut cfg = config.clone();
    cfg.steps_per_episode = intervals;
    WlanEnv::new(cfg)
}

/// Mean and population standard deviation of per-interval throughput when
/// `controls` is held for `intervals` intervals after a reset with `seed`.
pub fn evaluate_controls(
    config: &EnvConfig,
    controls: &MacControls,
    seed: u64,
    intervals: usize,
) -> Result<(f64, f64), EnvError> {
    let mut env = evaluation_env(config, intervals)?;
    env.reset(seed)?;
    let mut tps = Vec::with_capacity(intervals);
    for _ in 0..intervals {
        tps.push(env.step_controls(controls)?.metric);
    }
    Ok(mean_std(&tps))
}

/// Same protocol as [`evaluate_controls`] with the agent choosing actions
/// with exploration off.
pub fn evaluate_policy(config: &EnvConfig, agent: &dyn Agent, seed: u64, intervals: usize) -> Result<(f64, f64), EnvError> {
    let mut env = evaluation_env(config, intervals)?;
    let mut obs = env.reset(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e7a1);
    let mut tps = Vec::with_capacity(intervals);
    for _ in 0..intervals {
        let out = env.step(agent.act(&obs, &mut rng as &mut dyn RngCore, false)?)?;
        tps.push(out.metric);
        obs = out.obs;
    }
    Ok(mean_std(&tps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub cw_exp: u32,
    pub ampdu_n: u32,
    pub mean_mbps: f64,
    pub std_mbps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: MacControls,
    pub best_mean_mbps: f64,
    pub cells: Vec<GridCell>,
}

/// Exhaustive evaluation of every fixed-CW pair. Every pair sees the same
/// reset seed. Ties go to the smaller exponent, then the smaller aggregate.
pub fn grid_optimal(
    config: &EnvConfig,
    cw_exps: &[u32],
    ampdu_ns: &[u32],
    intervals: usize,
    seed: u64,
) -> Result<GridResult, EnvError> {
    if cw_exps.is_empty() || ampdu_ns.is_empty() {
        return Err(EnvError::Usage("grid sets must be non-empty".into()));
    }
    let mut exps = cw_exps.to_vec();
    let mut ampdus = ampdu_ns.to_vec();
    exps.sort_unstable();
    exps.dedup();
    ampdus.sort_unstable();
    ampdus.dedup();
    let mut cells = Vec::with_capacity(exps.len() * ampdus.len());
    let mut best: Option<GridCell> = None;
    for &cw_exp in &exps {
        for &ampdu_n in &ampdus {
            let controls = MacControls::fixed(cw_exp, ampdu_n);
            controls.validate()?;
            let (mean_mbps, std_mbps) = evaluate_controls(config, &controls, seed, intervals)?;
            let cell = GridCell { cw_exp, ampdu_n, mean_mbps, std_mbps };
            // Iteration order is ascending, so strict improvement keeps the tie rule.
            if best.is_none_or(|b| cell.mean_mbps > b.mean_mbps) {
                best = Some(cell);
            }
            cells.push(cell);
        }
    }
    let best = best.expect("non-empty grid");
    Ok(GridResult { best: MacControls::fixed(best.cw_exp, best.ampdu_n), best_mean_mbps: best.mean_mbps, cells })
}
