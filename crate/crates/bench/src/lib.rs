//! Config-driven runner for the misspecified MA(1) benchmark.

pub mod config;
pub mod output;
pub mod runner;
pub mod suite;
