//! Neural networks that emit prediction intervals directly, trained by
//! simulated annealing under pluggable interval cost functions.
//!
//! Numeric modules are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the CLI and benchmarks use.

pub mod baselines;
pub mod bench;
pub mod config;
pub mod costs;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod network;
pub mod scalar;
pub mod trainer;

pub use costs::{evaluate, CostKind, CostSpec};
pub use error::{Error, Result};
pub use network::{Activation, Interval, MlpModel};
pub use scalar::Scalar;
pub use trainer::{AnnealConfig, Architecture};

pub type Interval64 = network::Interval<f64>;
pub type Interval32 = network::Interval<f32>;
pub type Mlp64 = network::MlpModel<f64>;
pub type Mlp32 = network::MlpModel<f32>;
pub type Dataset64 = dataset::Dataset<f64>;
pub type SampleWindow64 = dataset::SampleWindow<f64>;
pub type PiMetrics64 = metrics::PiMetrics<f64>;
pub type TrainedModel64 = trainer::TrainedModel<f64>;
