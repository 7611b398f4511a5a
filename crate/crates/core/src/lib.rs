//! User feature models from location-based check-in data.
//!
//! The pipeline turns raw check-ins into per-user count matrices over a
//! context dimension (hour of day, distance from home) and a view dimension
//! (root or leaf venue category), screens context-view pairs by gain ratio,
//! decides which pair describes each user most stably over time, and trains
//! a multi-channel convolutional classifier that predicts the activity
//! category of a check-in from its context.

pub mod applicability;
pub mod eval;
pub mod features;
pub mod influence;
pub mod ingest;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod scalar;

pub use ingest::{ContextKind, FeatureSpace, Pair, ViewKind};
pub use matrix::DenseMatrix;
pub use scalar::{Numeric, Real};

/// Double-precision instantiations of the generic types.
pub type Matrix = DenseMatrix<f64>;
pub type ApplicabilityReport = applicability::ApplicabilityReport<f64>;
pub type ModelParams = model::UnifiedModelParams<f64>;
pub type TrainingExample = model::TrainingExample<f64>;
pub type Prepared = eval::Prepared<f64>;
