#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Discrete-time simulator for parallel/series lithium-ion packs with a
//! flying-capacitor cell equalizer.

pub mod balancer;
pub mod cell;
pub mod cli;
pub mod config;
pub mod error;
pub mod metrics;
pub mod pack;
pub mod plot;
pub mod profile;
pub mod scenarios;
pub mod sim;
pub mod sweep;
pub mod trace;

pub use error::{Error, Result};
