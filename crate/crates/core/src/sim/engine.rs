use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::params::{cw_from_exp, tx_duration, validate_stations, MacControls, SimParams, StationCfg, Traffic};
use super::SimError;

/// Uniform backoff counter in `[0, cw]`.
pub fn backoff_draw<R: Rng + ?Sized>(rng: &mut R, cw: u32) -> u32 {
    rng.random_range(0..=cw)
}

/// Counters accumulated over one [`Simulation::run_interval`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalStats {
    /// Elapsed simulated time, including the overshoot of the last busy period.
    pub duration_us: f64,
    pub successes: u64,
    pub collisions: u64,
    pub idle_slots: u64,
    pub busy_us: f64,
    pub delivered_bits_total: u64,
    pub delivered_bits_per_station: Vec<u64>,
    pub mpdus_delivered: u64,
    pub mpdu_errors: u64,
}

impl IntervalStats {
    fn empty(stations: usize) -> Self {
        Self {
            duration_us: 0.0,
            successes: 0,
            collisions: 0,
            idle_slots: 0,
            busy_us: 0.0,
            delivered_bits_total: 0,
            delivered_bits_per_station: vec![0; stations],
            mpdus_delivered: 0,
            mpdu_errors: 0,
        }
    }

    /// Delivered payload rate. Bits per µs is Mbps.
    pub fn throughput_mbps(&self) -> Result<f64, SimError> {
        if !(self.duration_us > 0.0) {
            return Err(SimError::Domain("throughput of a zero-length interval".into()));
        }
        Ok(self.delivered_bits_total as f64 / self.duration_us)
    }

    /// Fraction of transmission attempts that collided; 0 with no attempts.
    pub fn collision_rate(&self) -> f64 {
        let attempts = self.successes + self.collisions;
        if attempts == 0 {
            0.0
        } else {
            self.collisions as f64 / attempts as f64
        }
    }
}

/// What happened on the medium in one step of the event loop.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotEvent {
    /// `slots` consecutive idle slots.
    Idle { slots: u64 },
    Success { station: usize, mpdus: u32, errored: u32 },
    Collision { stations: Vec<usize> },
}

#[derive(Debug, Clone)]
struct StationState {
    cw_exp: u32,
    counter: u32,
    retries: u32,
    queue: u32,
    next_arrival_us: f64,
    unacked: u32,
    paused_until_us: f64,
}

/// A running single-BSS network. Owns its RNG, so independent handles can
/// run on separate threads.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: SimParams,
    stations: Vec<StationCfg>,
    state: Vec<StationState>,
    arrivals: Vec<Option<Exp<f64>>>,
    rng: ChaCha8Rng,
    clock_us: f64,
}

impl Simulation {
    /// Every station starts at the default minimum window (CW = 15) with a
    /// freshly drawn counter.
    pub fn new(params: SimParams, stations: Vec<StationCfg>, seed: u64) -> Result<Self, SimError> {
        params.validate()?;
        validate_stations(&stations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let payload_bits = params.payload_bits() as f64;
        let arrivals: Vec<Option<Exp<f64>>> = stations
            .iter()
            .map(|s| {
                if s.saturated {
                    None
                } else {
                    // MPDUs per µs.
                    Some(Exp::new(s.offered_load_mbps / payload_bits).expect("positive load checked above"))
                }
            })
            .collect();
        let cw_exp = MacControls::DEFAULT_CW_MIN_EXP;
        let state = arrivals
            .iter()
            .map(|arrival| {
                let counter = backoff_draw(&mut rng, cw_from_exp(cw_exp));
                let next_arrival_us = match arrival {
                    Some(exp) => exp.sample(&mut rng),
                    None => f64::INFINITY,
                };
                StationState {
                    cw_exp,
                    counter,
                    retries: 0,
                    queue: 0,
                    next_arrival_us,
                    unacked: 0,
                    paused_until_us: 0.0,
                }
            })
            .collect();
        Ok(Self { params, stations, state, arrivals, rng, clock_us: 0.0 })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn stations(&self) -> &[StationCfg] {
        &self.stations
    }

    pub fn clock_us(&self) -> f64 {
        self.clock_us
    }

    /// Residual backoff counter and current window of station `i`.
    pub fn backoff_state(&self, i: usize) -> (u32, u32) {
        let s = &self.state[i];
        (s.counter, cw_from_exp(s.cw_exp))
    }

    /// Run the network under `controls` for at least `duration_us`. A
    /// transmission in flight at the boundary completes and is attributed to
    /// this interval.
    pub fn run_interval(&mut self, controls: &MacControls, duration_us: f64) -> Result<IntervalStats, SimError> {
        if !(duration_us.is_finite() && duration_us > 0.0) {
            return Err(SimError::Domain(format!("interval duration must be > 0, got {duration_us}")));
        }
        self.apply_controls(controls)?;
        let start = self.clock_us;
        let end = start + duration_us;
        let mut stats = IntervalStats::empty(self.stations.len());
        let payload_bits = self.params.payload_bits();
        while self.clock_us < end {
            match self.next_event(controls, end) {
                SlotEvent::Idle { slots } => stats.idle_slots += slots,
                SlotEvent::Success { station, mpdus, errored } => {
                    let ok = u64::from(mpdus - errored);
                    stats.successes += 1;
                    stats.mpdus_delivered += ok;
                    stats.mpdu_errors += u64::from(errored);
                    stats.delivered_bits_total += ok * payload_bits;
                    stats.delivered_bits_per_station[station] += ok * payload_bits;
                }
                SlotEvent::Collision { .. } => stats.collisions += 1,
            }
        }
        stats.duration_us = self.clock_us - start;
        stats.busy_us = stats.duration_us - stats.idle_slots as f64 * self.params.slot_us;
        // Float noise only; idle and busy time partition the interval.
        if stats.busy_us < 0.0 {
            stats.busy_us = 0.0;
        }
        Ok(stats)
    }

    /// Record the next `count` medium events under `controls`.
    pub fn trace_events(&mut self, controls: &MacControls, count: usize) -> Result<Vec<SlotEvent>, SimError> {
        self.apply_controls(controls)?;
        Ok((0..count).map(|_| self.next_event(controls, f64::INFINITY)).collect())
    }

    fn apply_controls(&mut self, controls: &MacControls) -> Result<(), SimError> {
        controls.validate()?;
        let (lo, hi) = controls.exp_bounds();
        for s in &mut self.state {
            s.cw_exp = s.cw_exp.clamp(lo, hi);
            let cw = cw_from_exp(s.cw_exp);
            if s.counter > cw {
                s.counter = backoff_draw(&mut self.rng, cw);
            }
        }
        Ok(())
    }

    fn refresh_station(&mut self, i: usize) {
        if let Some(exp) = &self.arrivals[i] {
            let limit = self.params.queue_limit_mpdus;
            let s = &mut self.state[i];
            while s.next_arrival_us <= self.clock_us {
                if s.queue < limit {
                    s.queue += 1;
                }
                s.next_arrival_us += exp.sample(&mut self.rng);
            }
        }
    }

    fn is_backlogged(&self, i: usize) -> bool {
        let s = &self.state[i];
        s.paused_until_us <= self.clock_us && (self.stations[i].saturated || s.queue > 0)
    }

    /// Earliest time an idle station becomes backlogged.
    fn wake_time(&self, i: usize) -> f64 {
        let s = &self.state[i];
        if self.stations[i].saturated || s.queue > 0 {
            s.paused_until_us
        } else {
            s.next_arrival_us.max(s.paused_until_us)
        }
    }

    fn slots_until(&self, t: f64) -> u64 {
        let slots = ((t - self.clock_us) / self.params.slot_us).ceil();
        if slots >= 1.0 {
            slots as u64
        } else {
            1
        }
    }

    fn next_event(&mut self, controls: &MacControls, horizon: f64) -> SlotEvent {
        let n = self.stations.len();
        for i in 0..n {
            self.refresh_station(i);
        }
        let mut min_counter: Option<u32> = None;
        let mut next_wake = f64::INFINITY;
        for i in 0..n {
            if self.is_backlogged(i) {
                let c = self.state[i].counter;
                min_counter = Some(min_counter.map_or(c, |m| m.min(c)));
            } else {
                next_wake = next_wake.min(self.wake_time(i));
            }
        }
        match min_counter {
            Some(0) => self.transmit(controls),
            backlog => {
                let mut skip = match backlog {
                    Some(k) => u64::from(k),
                    None => u64::MAX,
                };
                if next_wake.is_finite() {
                    skip = skip.min(self.slots_until(next_wake));
                }
                if horizon.is_finite() {
                    skip = skip.min(self.slots_until(horizon));
                }
                if skip == u64::MAX {
                    skip = 1;
                }
                if backlog.is_some() {
                    for i in 0..n {
                        if self.is_backlogged(i) {
                            self.state[i].counter -= skip as u32;
                        }
                    }
                }
                self.clock_us += skip as f64 * self.params.slot_us;
                SlotEvent::Idle { slots: skip }
            }
        }
    }

    fn transmit(&mut self, controls: &MacControls) -> SlotEvent {
        let (cw_min_exp, cw_max_exp) = controls.exp_bounds();
        let mut transmitters = Vec::new();
        let mut waiting = Vec::new();
        for i in 0..self.stations.len() {
            if self.is_backlogged(i) {
                if self.state[i].counter == 0 {
                    transmitters.push(i);
                } else {
                    waiting.push(i);
                }
            }
        }
        let aggregate = |sim: &Self, i: usize| -> u32 {
            if sim.stations[i].saturated {
                controls.ampdu_n
            } else {
                sim.state[i].queue.min(controls.ampdu_n)
            }
        };
        let airtime = |sim: &Self, i: usize| -> f64 {
            tx_duration(aggregate(sim, i), &sim.params, sim.stations[i].phy_rate_mbps)
                .expect("aggregate >= 1 for a backlogged station")
        };

        let event = if let [station] = transmitters[..] {
            let mpdus = aggregate(self, station);
            let busy = self.params.difs_us + airtime(self, station);
            let errored = if self.params.per > 0.0 {
                let per = self.params.per;
                (0..mpdus).filter(|_| self.rng.random::<f64>() < per).count() as u32
            } else {
                0
            };
            self.clock_us += busy;
            let s = &mut self.state[station];
            if !self.stations[station].saturated {
                s.queue -= mpdus - errored;
            }
            s.retries = 0;
            s.cw_exp = cw_min_exp;
            if self.stations[station].traffic == Traffic::WindowedTcpLike {
                s.unacked += 1;
                if s.unacked >= self.params.tcp_window {
                    s.unacked = 0;
                    s.paused_until_us = self.clock_us + f64::from(self.params.tcp_ack_delay_slots) * self.params.slot_us;
                }
            }
            SlotEvent::Success { station, mpdus, errored }
        } else {
            let longest = transmitters.iter().map(|&i| airtime(self, i)).fold(0.0, f64::max);
            self.clock_us += self.params.difs_us + longest;
            for &i in &transmitters {
                let mpdus = aggregate(self, i);
                let s = &mut self.state[i];
                s.retries += 1;
                if self.params.retry_limit.is_some_and(|limit| s.retries > limit) {
                    if !self.stations[i].saturated {
                        s.queue -= mpdus;
                    }
                    s.retries = 0;
                    s.cw_exp = cw_min_exp;
                } else {
                    s.cw_exp = (s.cw_exp + 1).min(cw_max_exp);
                }
            }
            SlotEvent::Collision { stations: transmitters.clone() }
        };

        for &i in &transmitters {
            let cw = cw_from_exp(self.state[i].cw_exp);
            self.state[i].counter = backoff_draw(&mut self.rng, cw);
        }
        // Post-DIFS slot boundary.
        for &i in &waiting {
            self.state[i].counter -= 1;
        }
        event
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Generation, RateTable};
    use rand::SeedableRng;

    fn one_station() -> Vec<StationCfg> {
        StationCfg::homogeneous(1, Generation::WiFi6, &RateTable::default())
    }

    #[test]
    fn backoff_degenerate_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| backoff_draw(&mut rng, 0) == 0));
    }

    #[test]
    fn backoff_uniform_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut sum = 0u64;
        for _ in 0..draws {
            let b = backoff_draw(&mut rng, 15);
            assert!(b <= 15);
            sum += u64::from(b);
        }
        let mean = sum as f64 / draws as f64;
        let sigma = ((16.0f64 * 16.0 - 1.0) / 12.0).sqrt() / (draws as f64).sqrt();
        assert!((mean - 7.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn new_simulation_starts_in_min_window() {
        let sim = Simulation::new(SimParams::default(), one_station(), 42).unwrap();
        let (counter, cw) = sim.backoff_state(0);
        assert_eq!(cw, 15);
        assert!(counter <= 15);
    }

    #[test]
    fn empty_roster_rejected() {
        assert!(matches!(
            Simulation::new(SimParams::default(), vec![], 1),
            Err(SimError::Config { .. })
        ));
    }

    #[test]
    fn same_seed_same_events() {
        let stations = StationCfg::homogeneous(8, Generation::WiFi5, &RateTable::default());
        let controls = MacControls::standard_beb(4);
        let mut a = Simulation::new(SimParams::default(), stations.clone(), 42).unwrap();
        let mut b = Simulation::new(SimParams::default(), stations, 42).unwrap();
        let ea = a.trace_events(&controls, 1000).unwrap();
        let eb = b.trace_events(&controls, 1000).unwrap();
        assert_eq!(ea, eb);
        assert_eq!(a.clock_us().to_bits(), b.clock_us().to_bits());
    }

    #[test]
    fn single_station_never_collides() {
        let mut sim = Simulation::new(SimParams::default(), one_station(), 3).unwrap();
        for ampdu in [1, 16, 64] {
            let stats = sim.run_interval(&MacControls::standard_beb(ampdu), 200_000.0).unwrap();
            assert_eq!(stats.collisions, 0);
            assert!(stats.successes > 0);
        }
    }

    #[test]
    fn zero_duration_rejected() {
        let mut sim = Simulation::new(SimParams::default(), one_station(), 3).unwrap();
        assert!(sim.run_interval(&MacControls::fixed(4, 1), 0.0).is_err());
        let stats = IntervalStats::empty(1);
        assert!(stats.throughput_mbps().is_err());
    }

    #[test]
    fn throughput_arithmetic() {
        let mut stats = IntervalStats::empty(1);
        stats.duration_us = 1e5;
        assert_eq!(stats.throughput_mbps().unwrap(), 0.0);
        stats.delivered_bits_total = 100_000_000;
        assert!((stats.throughput_mbps().unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn beb_window_doubles_and_resets() {
        // Two stations forced to collide: both at counter 0.
        let stations = StationCfg::homogeneous(2, Generation::WiFi6, &RateTable::default());
        let mut sim = Simulation::new(SimParams::default(), stations, 9).unwrap();
        sim.state[0].counter = 0;
        sim.state[1].counter = 0;
        let controls = MacControls::standard_beb(1);
        let ev = sim.trace_events(&controls, 1).unwrap();
        assert_eq!(ev[0], SlotEvent::Collision { stations: vec![0, 1] });
        assert_eq!(sim.backoff_state(0).1, 31);
        assert_eq!(sim.backoff_state(1).1, 31);
        // Let station 0 win alone.
        sim.state[0].counter = 0;
        sim.state[1].counter = 5;
        let ev = sim.trace_events(&controls, 1).unwrap();
        assert!(matches!(ev[0], SlotEvent::Success { station: 0, .. }));
        assert_eq!(sim.backoff_state(0).1, 15);
        assert_eq!(sim.backoff_state(1), (4, 31));
    }

    #[test]
    fn tcp_like_station_pauses_after_window() {
        let mut st = one_station();
        st[0].traffic = Traffic::WindowedTcpLike;
        let params = SimParams::default();
        let mut sim = Simulation::new(params.clone(), st, 5).unwrap();
        let controls = MacControls::fixed(4, 1);
        let mut successes = 0;
        while successes < params.tcp_window {
            if let SlotEvent::Success { .. } = sim.trace_events(&controls, 1).unwrap()[0] {
                successes += 1;
            }
        }
        assert!(sim.state[0].paused_until_us > sim.clock_us());
        assert!(!sim.is_backlogged(0));
    }

    #[test]
    fn unsaturated_station_carries_offered_load() {
        let rates = RateTable::default();
        let mut st = StationCfg::homogeneous(3, Generation::WiFi6, &rates);
        for s in &mut st {
            s.saturated = false;
            s.offered_load_mbps = 20.0;
        }
        let mut sim = Simulation::new(SimParams::default(), st, 11).unwrap();
        let stats = sim.run_interval(&MacControls::standard_beb(16), 2_000_000.0).unwrap();
        let tput = stats.throughput_mbps().unwrap();
        assert!((tput - 60.0).abs() < 6.0, "throughput {tput}");
    }
}
