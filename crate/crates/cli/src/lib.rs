//! Configuration, train/eval entry points, metric exports and SVG plots.

pub mod config;
pub mod plot;
pub mod records;
pub mod run;
