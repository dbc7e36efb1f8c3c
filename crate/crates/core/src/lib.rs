//! Limit-hit event study toolkit: tick ingestion, daily price limits and
//! first-hit detection, microstructure features, binary-response GLM fitting,
//! study orchestration and a seeded synthetic data generator.

pub mod error;
pub mod features;
pub mod glm;
pub mod limits;
pub mod marketdata;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
