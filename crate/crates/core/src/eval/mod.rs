//! Splitting, scoring, the frequency baseline, synthetic cohorts and the
//! two research-question experiments.

mod baseline;
mod experiments;
mod metrics;
mod split;
mod synth;

use thiserror::Error;

pub use baseline::{FrequencyBaseline, PairPredictor};
pub use experiments::{
    prepare, run_rq1, run_rq2, BucketScheme, Prepared, Rq1Cell, Rq1Row, Rq2Result,
};
pub use metrics::{accuracy_at_k, average_ranks, build_queries, spearman, EvalQuery};
pub use split::{split_dataset, DatasetSplit, SplitSpec};
pub use synth::{generate_synthetic, synthetic_hierarchy, GroupProfile, SynthDataset, SynthSpec};

use crate::applicability::ApplicabilityError;
use crate::features::FeatureError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} prediction lists for {queries} queries")]
    LengthMismatch { predictions: usize, queries: usize },
    #[error("prediction list {index} has {len} labels, need {k}")]
    ShortList { index: usize, len: usize, k: usize },
    #[error("K must be positive, got {0}")]
    BadK(usize),
    #[error("empty training split")]
    EmptyTrain,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Applicability(#[from] ApplicabilityError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
