//! Conditional score learning and score-based CUSUM change detection for
//! Markov processes.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod detect;
pub mod error;
pub mod mocap;
pub mod rng;
pub mod score;
pub mod scorenet;
pub mod simulate;
pub mod standardize;

pub use error::{Error, ErrorClass, Result};
