//! Masked Bayesian non-negative matrix factorization for detecting
//! (possibly overlapping) core-periphery pairs in networks.

pub mod baseline;
pub mod bench;
pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod nmf;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{Directedness, Graph};
pub use nmf::{DetectionResult, FactorState, FitOptions, Hyperparameters, MaskPrior};
pub use synthetic::{GroundTruth, PlantedConfig};
