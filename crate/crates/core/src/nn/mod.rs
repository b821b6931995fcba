//! Dense matrices, reverse-mode gradients, and the optimizer.

mod checkpoint;
mod matrix;
mod optim;
mod params;
mod tape;

pub use checkpoint::{
    load_checkpoint_into, read_checkpoint, restore_from, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use matrix::Matrix;
pub use optim::{adamw_step, OptimConfig};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{sigmoid, Activation, AggregatorKind, Tape, Var, PROB_EPS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("aggregate over an empty set of rows")]
    EmptyAggregate,
    #[error("bad aggregation weights: {0}")]
    Weights(String),
    #[error("label {0} is not 0 or 1")]
    Label(f64),
    #[error("loss is not a scalar")]
    NotScalar,
    #[error("tape already consumed by a backward pass")]
    TapeSpent,
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
