//! Deterministic simulator of a digital ecosystem: habitats in an adaptive
//! peer network, per-request evolution of agent sequences, and targeted
//! agent migration driven by embedded similarity recognizers.

pub mod agent;
pub mod error;
pub mod evolution;
pub mod migration;
pub mod network;
pub mod recognition;
pub mod semantic;
pub mod sim;

pub use error::{EcoError, Result};
