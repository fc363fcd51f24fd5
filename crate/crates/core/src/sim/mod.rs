//! Slot-level simulation of one BSS running 802.11 DCF.
//!
//! Time advances in virtual slots: an idle slot of `slot_us`, or a busy
//! period (DIFS + transmission) when at least one backlogged station's
//! backoff counter has reached zero. One transmitter is a success, two or
//! more are a collision. Counters of waiting stations are frozen while the
//! medium is busy and decremented once at the slot boundary that ends the
//! following DIFS, so every virtual slot advances the backoff chain by one.

mod engine;
mod params;

pub use engine::{backoff_draw, IntervalStats, Simulation};
pub use params::{
    cw_from_exp, tx_duration, validate_stations, CwMode, Generation, MacControls, RateTable, SimParams,
    StationCfg, Traffic, FIXED_CW_EXP_RANGE, MAX_AMPDU, MAX_CW_EXP,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
}

impl SimError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config { field: field.into(), reason: reason.into() }
    }
}
