//! IO, configuration, and experiment orchestration around `jumpscan-core`.

pub mod config;
pub mod formats;
pub mod harness;
pub mod report;
pub mod shapes;
