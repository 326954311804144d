//! Simulation harness and experiments on top of `dbound-core`.

pub mod error;
pub mod experiments;
pub mod io;
pub mod simkit;
mod text;

pub use error::{Error, Result};
