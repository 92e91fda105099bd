//! Hierarchical echo state networks.
//!
//! Building blocks for reservoir computing with shallow, wide and deep
//! reservoir topologies: seeded network construction, ridge-regression
//! readouts, benchmark task generators, a microbial genetic algorithm for
//! hyperparameter search, reservoir-quality probes, and an experiment
//! harness with a CLI front end.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod optimizer;
pub mod readout;
pub mod reservoir;
pub mod tasks;

pub use error::{Error, Result};
