//! Metrics, splitting, bucketed analyses, exports and multi-seed trials.

pub mod buckets;
pub mod export;
pub mod metrics;
pub mod split;
pub mod trials;

pub use buckets::{bucket_keys, bucket_metrics, degree_bucket_label, BucketReport, Bucketing};
pub use export::{
    export_embeddings, export_misclassified_logits, write_embedding_tsv, write_misclassified_tsv, EmbeddingRow,
    MisclassifiedRow,
};
pub use metrics::{accuracy, auc, confusion, evaluate, f1, Confusion, MetricsReport};
pub use split::{stratified_split, Split};
pub use trials::{run_trial, run_trials, run_trials_with, ExperimentConfig, REGULARIZATION_NOTE, MetricStats, SeedReport, TrialSummary, TrialsError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("no items to evaluate")]
    Empty,
    #[error("score is NaN")]
    NaNScore,
    #[error("split fractions {0:?} must be in [0, 1] and sum to 1")]
    Fractions([f64; 3]),
    #[error("class {class} has {count} items; at least 10 required")]
    TooFewItems { class: u8, count: usize },
    #[error("label {0} is not 0 or 1")]
    Label(u8),
    #[error("sample fraction {0} not in (0, 1]")]
    SampleFraction(f64),
    #[error("bucketing needs {0}")]
    MissingAttribute(&'static str),
    #[error("no seeds given")]
    NoSeeds,
}
