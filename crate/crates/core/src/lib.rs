//! Infinite-width kernel and angle computations for deep ReLU and linear
//! networks, with finite-width Monte Carlo checks and small training runs.

pub mod angles;
pub mod data;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod mcnet;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use kernel::{DatasetMatrix, KernelMatrix, Normalization, Provenance};
pub use linalg::{Matrix, SpectrumReport};
pub use mcnet::{Activation, NetworkConfig, SampledNetwork};
