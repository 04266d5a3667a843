//! Single-node numerical core for grid-partitioned Newton training of
//! feedforward networks.
//!
//! This crate holds everything that does not require communication: network
//! evaluation and its reference derivatives, parameter initialization, the
//! variable-partition grid and its cost model, sparse dataset handling,
//! metrics, the stochastic-gradient baseline, deterministic random numbers,
//! and model checkpoints. The reference implementations here double as
//! oracles for the distributed engine.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod init;
pub mod metrics;
pub mod net;
pub mod partition;
pub mod rng;
pub mod sgd;

pub use error::{CoreError, Result};
