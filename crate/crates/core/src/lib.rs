//! Simulator and privacy accountant for federated learning with a split
//! model: each client keeps a private block of parameters local and only
//! releases a clipped, noised public block, with clients checking in at
//! random each round.

pub mod accountant;
pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod mechanisms;
pub mod model;
pub mod report;
pub mod rng;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
