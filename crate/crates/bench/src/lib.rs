//! Experiment harness: configuration, BER sweeps, comparisons and the
//! passband carrier-offset demonstration.

pub mod cfo_demo;
pub mod compare;
pub mod config;
pub mod stats;
pub mod sweep;
