//! Slot-level 802.11 DCF simulation and learning agents that tune the
//! contention window and A-MPDU length of a dense single-BSS WLAN.
//!
//! The crate is organised bottom-up:
//!
//! - [`sim`]: the DCF simulator (backoff, collisions, aggregation, PER).
//! - [`analytic`]: the Bianchi saturation-throughput fixed point, used as
//!   an oracle for the simulator.
//! - [`nn`]: a small dense-network engine (MLPs, backprop, Adam,
//!   checkpoints).
//! - [`agent`]: the diffusion-actor / twin-critic agent and a plain DDPG
//!   baseline sharing one replay buffer and checkpoint layout.
//! - [`env`]: environments the agents train against: the WLAN adapter
//!   and a stateless 2-D bandit used as a sanity check.
//! - [`train`]: the seeded training loop and its CSV telemetry.

pub mod agent;
pub mod analytic;
pub mod env;
pub mod nn;
pub mod sim;
pub mod train;
