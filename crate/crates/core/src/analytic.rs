//! Bianchi's saturation-throughput model for a homogeneous DCF network.
//!
//! Each of `n` saturated stations transmits in a virtual slot with
//! probability `tau`; a transmission collides with probability `p`. The two
//! are tied by
//!
//! ```text
//! tau = 2 (1 - 2p) / ((1 - 2p)(W + 1) + p W (1 - (2p)^m))
//! p   = 1 - (1 - tau)^(n - 1)
//! ```
//!
//! The first relation is evaluated in its equivalent series form
//! `2 / (W + 1 + p W sum_{i<m} (2p)^i)`, which has no removable singularity
//! at `p = 1/2`.

use crate::sim::{tx_duration, SimError, SimParams};

/// Bracket width at which bisection stops.
pub const BISECTION_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 200;
/// Residual accepted on the collision-probability equation.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticError {
    #[error("invalid model input: {0}")]
    Input(String),
    #[error("fixed point did not converge: {0}")]
    Numeric(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Durations of the three kinds of virtual slot, and the payload carried by
/// a success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Airtime {
    pub slot_us: f64,
    pub success_tx_us: f64,
    pub collision_tx_us: f64,
    pub payload_bits: f64,
}

impl Airtime {
    /// Airtime accounting identical to the simulator: a busy period is DIFS
    /// followed by one aggregate's `tx_duration`, for successes and
    /// collisions alike.
    pub fn from_sim(params: &SimParams, ampdu_n: u32, phy_rate_mbps: f64) -> Result<Self, SimError> {
        let busy = params.difs_us + tx_duration(ampdu_n, params, phy_rate_mbps)?;
        Ok(Self {
            slot_us: params.slot_us,
            success_tx_us: busy,
            collision_tx_us: busy,
            payload_bits: f64::from(ampdu_n) * params.payload_bits() as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BianchiInput {
    pub n: u32,
    /// Minimum window size, `CWmin + 1`.
    pub w: u32,
    /// Number of doubling stages; 0 is a fixed window.
    pub m: u32,
    pub airtime: Airtime,
}

impl BianchiInput {
    fn validate(&self) -> Result<(), AnalyticError> {
        if self.n < 1 {
            return Err(AnalyticError::Input("n must be >= 1".into()));
        }
        if self.w < 2 {
            return Err(AnalyticError::Input(format!("W must be >= 2, got {}", self.w)));
        }
        let a = &self.airtime;
        if !(a.slot_us > 0.0 && a.success_tx_us > 0.0 && a.collision_tx_us > 0.0 && a.payload_bits >= 0.0) {
            return Err(AnalyticError::Input("airtime entries must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BianchiOutput {
    pub tau: f64,
    pub p: f64,
    pub p_tr: f64,
    pub p_s: f64,
    pub s_mbps: f64,
}

/// Per-slot transmission probability given the conditional collision
/// probability `p`.
pub fn tau_given_p(p: f64, w: u32, m: u32) -> f64 {
    let w = f64::from(w);
    let two_p = 2.0 * p;
    let mut series = 0.0;
    let mut term = 1.0;
    for _ in 0..m {
        series += term;
        term *= two_p;
    }
    2.0 / (w + 1.0 + p * w * series)
}

/// Solve the coupled `(tau, p)` equations by bisection on `p in [0, 1]`.
pub fn solve_tau_p(input: &BianchiInput) -> Result<(f64, f64), AnalyticError> {
    input.validate()?;
    let (w, m) = (input.w, input.m);
    if input.n == 1 {
        return Ok((tau_given_p(0.0, w, m), 0.0));
    }
    let contenders = (input.n - 1) as i32;
    // Increasing in p: tau falls as p rises, so the collision side falls too.
    let residual = |p: f64| p - (1.0 - (1.0 - tau_given_p(p, w, m)).powi(contenders));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut iterations = 0;
    while hi - lo > BISECTION_TOL {
        if iterations == MAX_ITERATIONS {
            return Err(AnalyticError::Numeric(format!("bracket still {} wide", hi - lo)));
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let p = 0.5 * (lo + hi);
    let r = residual(p);
    if !(r.abs() < RESIDUAL_TOL) {
        return Err(AnalyticError::Numeric(format!("residual {r:e} at p = {p}")));
    }
    Ok((tau_given_p(p, w, m), p))
}

/// `S = P_s P_tr E[P] / ((1 - P_tr) sigma + P_tr P_s T_s + P_tr (1 - P_s) T_c)`.
pub fn saturation_throughput(input: &BianchiInput) -> Result<BianchiOutput, AnalyticError> {
    let (tau, p) = solve_tau_p(input)?;
    Ok(throughput_at(input.n, tau, p, &input.airtime))
}

fn throughput_at(n: u32, tau: f64, p: f64, a: &Airtime) -> BianchiOutput {
    let n_f = f64::from(n);
    let p_tr = 1.0 - (1.0 - tau).powi(n as i32);
    if p_tr <= 0.0 {
        return BianchiOutput { tau, p, p_tr: 0.0, p_s: 0.0, s_mbps: 0.0 };
    }
    let p_s = (n_f * tau * (1.0 - tau).powi(n as i32 - 1) / p_tr).min(1.0);
    let denom = (1.0 - p_tr) * a.slot_us + p_tr * p_s * a.success_tx_us + p_tr * (1.0 - p_s) * a.collision_tx_us;
    BianchiOutput { tau, p, p_tr, p_s, s_mbps: p_s * p_tr * a.payload_bits / denom }
}
