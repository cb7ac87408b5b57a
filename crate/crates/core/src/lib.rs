//! Simulator for space-division-multiplexed self-homodyne coherent detection.

pub mod channel;
pub mod dsp;
pub mod equalizer;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod rx;
pub mod txgen;
pub mod units;

pub use error::{Error, Result};
