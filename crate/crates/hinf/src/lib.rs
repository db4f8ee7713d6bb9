//! File formats, configuration and experiment drivers for the `hinf`
//! command-line tool. The numerics live in `hinf-core`.

pub mod artifacts;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod output;

pub use error::{Error, Result};
