//! Trust management core for crowdsensed environmental monitoring.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithmic
//! piece of the system:
//!
//! * [`entity`]: discrete Bayesian learning of each user's score and the
//!   scalar entity trust derived from it.
//! * [`context`]: spatial, temporal and semantic weights, combined with
//!   entity trust into a per-observation weight.
//! * [`dst`]: Dempster-Shafer mass functions over a quantized frame and
//!   Dempster's rule of combination.
//! * [`engine`]: the epoch state machine that ties the three together.
//! * [`baseline`]: a majority-vote comparison scheme.
//! * [`sim`]: a seeded population/behavior/channel simulator driving both.
//! * [`metrics`]: reductions of simulation ledgers into the series that are
//!   reported and checked.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod baseline;
pub mod context;
pub mod dst;
pub mod engine;
pub mod entity;
pub mod ids;
pub mod metrics;
pub mod sim;

mod num;

pub use ids::{AreaId, FactorId, UserId};
