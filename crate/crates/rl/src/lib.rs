//! Hierarchical lane-change / car-following agents and the training loop.

pub mod agents;
pub mod buffer;
pub mod config;
pub mod episode;
pub mod error;
pub mod metrics;
pub mod sample;
pub mod schedule;
pub mod trainer;

pub use error::{Result, RlError};
