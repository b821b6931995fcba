use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::metrics::evaluate;
use crate::graph::BipartiteGraph;
use crate::nn::{adamw_step, Matrix, NnError, OptimConfig, Tape};

use super::{Model, ModelError, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Drives mini-batch shuffling.
    pub seed: u64,
    pub optimizer: OptimConfig,
    /// Validation cadence in steps; 0 evaluates only at epoch ends.
    pub eval_every: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 512,
            seed: 0,
            optimizer: OptimConfig::default(),
            eval_every: 0,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub step: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_f1: f64,
    pub val_auc: Option<f64>,
}

pub struct TrainOutcome {
    /// Parameters restored to the best validation checkpoint.
    pub model: Model,
    pub history: Vec<HistoryRecord>,
    pub best_step: u64,
    pub best_val_accuracy: f64,
}

impl TrainOutcome {
    pub fn write_history<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        for r in &self.history {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

fn labels_of(labels: &[u8], ids: &[u32]) -> Vec<f64> {
    ids.iter().map(|&t| f64::from(labels[t as usize])).collect()
}

/// Mini-batch training with AdamW and a warm-up linear schedule, keeping
/// the parameters with the best validation accuracy.
pub fn train(
    spec: ModelSpec,
    graph: &BipartiteGraph,
    features: &Matrix,
    labels: &[u8],
    train_ids: &[u32],
    val_ids: &[u32],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    if train_ids.is_empty() {
        return Err(ModelError::EmptySplit("training"));
    }
    if val_ids.is_empty() {
        return Err(ModelError::EmptySplit("validation"));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(ModelError::Config("epochs and batch_size must be positive".into()));
    }
    if labels.len() != graph.num_tweets() {
        return Err(ModelError::Config("one label per tweet required".into()));
    }
    let mut model = Model::new(spec, graph, features)?;
    let steps_per_epoch = train_ids.len().div_ceil(cfg.batch_size) as u64;
    let opt = OptimConfig {
        total_steps: steps_per_epoch * cfg.epochs as u64,
        ..cfg.optimizer
    };
    opt.validate()?;

    let val_truth: Vec<u8> = val_ids.iter().map(|&t| labels[t as usize]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = train_ids.to_vec();
    let mut history = Vec::new();
    let mut best: Option<(f64, u64, Vec<Matrix>)> = None;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let mut step = 0u64;

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut tape = Tape::new();
            let y = labels_of(labels, batch);
            let loss = model
                .forward(&mut tape, graph, features, batch, step)
                .and_then(|f| Ok(tape.bce_loss(f.probs, &y)?))
                .map_err(|e| diverged(step, e))?;
            loss_sum += tape.value(loss)[(0, 0)];
            loss_count += 1;
            model.store.zero_grad();
            tape.backward(loss, &mut model.store)?;
            let lr = adamw_step(&mut model.store, &opt, step);
            if model.store.iter().any(|p| !p.value.is_finite()) {
                return Err(ModelError::Diverged {
                    step,
                    detail: "non-finite parameter after update".into(),
                });
            }
            step += 1;

            let epoch_end = b as u64 + 1 == steps_per_epoch;
            let periodic = cfg.eval_every > 0 && step % cfg.eval_every == 0;
            if epoch_end || periodic {
                let pred = model.predict(graph, features, val_ids, 2048)?;
                let report = evaluate(&pred.probabilities(), &val_truth, cfg.threshold)?;
                history.push(HistoryRecord {
                    step,
                    lr,
                    train_loss: loss_sum / loss_count as f64,
                    val_accuracy: report.accuracy,
                    val_f1: report.f1,
                    val_auc: report.auc,
                });
                loss_sum = 0.0;
                loss_count = 0;
                if best.as_ref().map_or(true, |(acc, _, _)| report.accuracy > *acc) {
                    best = Some((report.accuracy, step, model.store.snapshot()));
                }
            }
        }
    }
    let (best_val_accuracy, best_step, values) = best.expect("at least one evaluation per epoch");
    model.store.restore(&values);
    Ok(TrainOutcome {
        model,
        history,
        best_step,
        best_val_accuracy,
    })
}

fn diverged(step: u64, e: ModelError) -> ModelError {
    match e {
        ModelError::Nn(NnError::NonFinite(what)) => ModelError::Diverged {
            step,
            detail: format!("non-finite values in {what}"),
        },
        other => other,
    }
}
