//! Round-dependent distance-bounding: protocol core, baseline protocols,
//! adversary strategies, analytic evaluators and the noise-tolerant decision.
//!
//! The crate is `no_std` with `alloc`. IO, configuration and the Monte Carlo
//! driver live in the `dbound` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adversaries;
pub mod analytics;
pub mod baselines;
pub mod bits;
pub mod error;
pub mod noise;
pub mod prf;
pub mod protocol;
pub mod scenario;

pub use bits::Bits;
pub use error::{Error, Result};
