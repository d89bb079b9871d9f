//! Memorization measurement and forecasting for families of language models.
//!
//! Match masks produced by comparing generated continuations with training
//! data are scored, reduced to memorized sets, and compared across model sizes
//! and checkpoints: precision/recall of a cheap predictor against a target,
//! phi correlation matrices, compute-cost grids with an equi-compute frontier,
//! and the shape of the score distribution.
//!
//! Counting is exact; statistics are generic over the floating scalar
//! ([`Scalar`]). The aliases at the crate root fix the scalar to `f64`.

pub mod distribution;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod forecast;
pub mod idset;
pub mod model;
pub mod report;
pub mod scalar;
pub mod scorer;
pub mod sets;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use eval::Confusion;
pub use forecast::Flops;
pub use idset::IdSet;
pub use model::{
    validate_suite, CheckpointRef, CheckpointSpec, ModelSpec, ScoreParams, SequenceId, Suite,
    Violation, ViolationKind,
};
pub use scalar::Scalar;
pub use scorer::{is_extractible, memorization_score, MatchRecord, Score, TokenRecord};
pub use sets::MemorizedSet;

pub type CorrelationMatrix = eval::CorrelationMatrix<f64>;
pub type PredictionReport = eval::PredictionReport<f64>;
pub type SuiteComparison = eval::SuiteComparison<f64>;
pub type GridRow = forecast::GridRow<f64>;
pub type PredictorGrid = forecast::PredictorGrid<f64>;
pub type Frontier = forecast::Frontier<f64>;
pub type Recommendation = forecast::Recommendation<f64>;
pub type LogLogFit = forecast::LogLogFit<f64>;
pub type TailFitReport = distribution::TailFitReport<f64>;
