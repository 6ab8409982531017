pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod irl;
pub mod metrics;
pub mod pipeline;
pub mod rerank;
pub mod retrieval;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RewardModelF32 = irl::RewardModel<f32>;
pub type RewardModelF64 = irl::RewardModel<f64>;
pub type FeatureMatrixF32 = features::FeatureMatrix<f32>;
pub type FeatureMatrixF64 = features::FeatureMatrix<f64>;
pub type StandardizerF32 = features::Standardizer<f32>;
pub type StandardizerF64 = features::Standardizer<f64>;
pub type TransitionF32 = irl::Transition<f32>;
pub type TransitionF64 = irl::Transition<f64>;
