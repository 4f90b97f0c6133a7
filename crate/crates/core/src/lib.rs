//! Simulation and representation layer for hierarchical graph reinforcement
//! learning on a three-lane highway with on/off ramps.
//!
//! - [`sim`]: fixed-step micro-simulator (IDM human drivers, discrete lane hops).
//! - [`graph`]: base, lane-change and following traffic graphs plus degree and
//!   attention-entropy analyses.
//! - [`risk`]: braking safety distance, safety coefficient and neighbor slots.
//! - [`env`]: the asynchronous two-dimension decision process built on the above.

pub mod env;
pub mod error;
pub mod graph;
pub mod risk;
pub mod sim;

pub use error::{CoreError, Result};
