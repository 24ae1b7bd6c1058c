//! Adaptive transit routing that maximizes the probability of reaching a
//! destination within a time budget.
//!
//! The pipeline: build pmfs on a [`dist::TimeGrid`], describe lines in a
//! [`network::NetworkSpec`], expand an origin-destination pair into an
//! [`network::ExpandedGraph`], then [`solver::solve`] it.

pub mod dist;
pub mod error;
pub mod gtfs;
pub mod network;
pub mod policy;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
