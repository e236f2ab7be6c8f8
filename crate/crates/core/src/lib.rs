//! Likelihood-free (ABC) inference with tools for checking its large-sample behaviour.

pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod harness;
pub mod models;
pub mod oracles;
pub mod seed;
pub mod stats;
pub mod summaries;

pub use error::{Error, Result};
