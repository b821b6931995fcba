//! Experiment configuration and multi-seed orchestration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::buckets::{bucket_keys, bucket_metrics, BucketReport, Bucketing};
use super::metrics::{evaluate, MetricsReport};
use super::split::stratified_split;
use super::EvalError;
use crate::dataset::Dataset;
use crate::model::{train, BaselineConfig, ModelError, ModelKind, ModelSpec, SagnnConfig, TrainConfig, UserInit};
use crate::nn::{Activation, AggregatorKind, OptimConfig};
use crate::sampler::WalkConfig;

/// Every knob of a train/evaluate run; the JSON form of the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub aggregator: AggregatorKind,
    pub layers: usize,
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    pub num_walks: usize,
    pub top_k: usize,
    pub exclude_self: bool,
    pub init_strategy: UserInit,
    pub baseline_layers: usize,
    pub fanout: usize,
    pub classifier_bias: bool,
    pub threshold: f64,
    pub eval_every: u64,
    pub split: [f64; 3],
    /// Split seed; falls back to `seed` so one seed drives everything.
    pub split_seed: Option<u64>,
    pub seed: u64,
    pub buckets: Vec<Bucketing>,
    pub bucket_edges: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sagnn = SagnnConfig::default();
        let base = BaselineConfig::default();
        let walk = WalkConfig::default();
        let opt = OptimConfig::default();
        let train = TrainConfig::default();
        ExperimentConfig {
            model: ModelKind::Sagnn,
            aggregator: sagnn.aggregator,
            layers: sagnn.num_layers,
            dim: sagnn.hidden_dim,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: opt.learning_rate,
            weight_decay: opt.weight_decay,
            warmup_fraction: opt.warmup_fraction,
            num_walks: walk.num_walks,
            top_k: walk.top_k,
            exclude_self: walk.exclude_self,
            init_strategy: base.init_strategy,
            baseline_layers: base.num_layers,
            fanout: base.fanout,
            classifier_bias: false,
            threshold: train.threshold,
            eval_every: train.eval_every,
            split: [0.8, 0.1, 0.1],
            split_seed: None,
            seed: 0,
            buckets: Vec::new(),
            bucket_edges: vec![5, 20],
        }
    }
}

impl ExperimentConfig {
    pub fn model_spec(&self, input_dim: usize, seed: u64) -> ModelSpec {
        ModelSpec {
            kind: self.model,
            input_dim,
            sagnn: SagnnConfig {
                num_layers: self.layers,
                hidden_dim: self.dim,
                aggregator: self.aggregator,
                edge_type_aware: true,
                activation: Activation::Relu,
            },
            baseline: BaselineConfig {
                init_strategy: self.init_strategy,
                num_layers: self.baseline_layers,
                hidden_dim: self.dim,
                fanout: self.fanout,
            },
            walk: WalkConfig {
                num_walks: self.num_walks,
                top_k: self.top_k,
                rng_seed: seed,
                exclude_self: self.exclude_self,
            },
            classifier_bias: self.classifier_bias,
            seed,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            optimizer: OptimConfig {
                learning_rate: self.lr,
                weight_decay: self.weight_decay,
                warmup_fraction: self.warmup_fraction,
                ..OptimConfig::default()
            },
            eval_every: self.eval_every,
            threshold: self.threshold,
        }
    }

    pub fn effective_split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.seed)
    }
}

/// Test-set results of one seed's best-validation checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub model: ModelKind,
    pub best_step: u64,
    pub best_val_accuracy: f64,
    pub test: MetricsReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buckets: Vec<BucketReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation; absent with fewer than two values.
    pub std: Option<f64>,
    pub count: usize,
}

impl MetricStats {
    pub fn from_values(values: &[f64]) -> Option<MetricStats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(MetricStats {
            mean,
            std,
            count: values.len(),
        })
    }
}

/// Recorded in every summary so results are not mistaken for regularized runs.
pub const REGULARIZATION_NOTE: &str = "AdamW weight decay only; no dropout or other regularization";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seeds: Vec<u64>,
    pub reports: Vec<SeedReport>,
    pub accuracy: Option<MetricStats>,
    pub f1: Option<MetricStats>,
    /// Over the seeds whose AUC is defined.
    pub auc: Option<MetricStats>,
    pub regularization: String,
}

impl TrialSummary {
    pub fn from_reports(reports: Vec<SeedReport>) -> TrialSummary {
        let pick = |f: &dyn Fn(&SeedReport) -> Option<f64>| {
            MetricStats::from_values(&reports.iter().filter_map(f).collect::<Vec<_>>())
        };
        TrialSummary {
            seeds: reports.iter().map(|r| r.seed).collect(),
            accuracy: pick(&|r| Some(r.test.accuracy)),
            f1: pick(&|r| Some(r.test.f1)),
            auc: pick(&|r| r.test.auc),
            regularization: REGULARIZATION_NOTE.to_string(),
            reports,
        }
    }

    /// Mean of a bucket's accuracy across seeds, skipping seeds where it is empty.
    pub fn bucket_accuracy(&self, bucketing: Bucketing, label: &str) -> Option<MetricStats> {
        let values: Vec<f64> = self
            .reports
            .iter()
            .flat_map(|r| &r.buckets)
            .filter(|b| b.bucketing == bucketing && b.label == label)
            .filter_map(|b| b.metrics.as_ref().map(|m| m.accuracy))
            .collect();
        MetricStats::from_values(&values)
    }
}

#[derive(Debug, Error)]
#[error("trial for seed {seed} failed: {source}")]
pub struct TrialsError {
    pub seed: u64,
    #[source]
    pub source: ModelError,
    /// Summary of the trials that finished before the failure.
    pub partial: TrialSummary,
}

/// Trains one model with `seed` and evaluates its best checkpoint on the test part.
pub fn run_trial(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<SeedReport, ModelError> {
    let split = stratified_split(&data.labels, cfg.split, cfg.effective_split_seed())?;
    let spec = cfg.model_spec(data.features.cols(), seed);
    let outcome = train(
        spec,
        &data.graph,
        &data.features,
        &data.labels,
        &split.train,
        &split.val,
        &cfg.train_config(seed),
    )?;
    let pred = outcome.model.predict(&data.graph, &data.features, &split.test, 2048)?;
    let scores = pred.probabilities();
    let truth: Vec<u8> = split.test.iter().map(|&t| data.labels[t as usize]).collect();
    let test = evaluate(&scores, &truth, cfg.threshold)?;
    let mut buckets = Vec::new();
    for &b in &cfg.buckets {
        let (keys, labels) = bucket_keys(data, &split.test, b, &cfg.bucket_edges)?;
        buckets.extend(bucket_metrics(b, &scores, &truth, &keys, &labels, cfg.threshold)?);
    }
    Ok(SeedReport {
        seed,
        model: cfg.model,
        best_step: outcome.best_step,
        best_val_accuracy: outcome.best_val_accuracy,
        test,
        buckets,
    })
}

/// Runs seeds in order; the first failure aborts and carries the finished reports.
pub fn run_trials(cfg: &ExperimentConfig, data: &Dataset, seeds: &[u64]) -> Result<TrialSummary, TrialsError> {
    run_trials_with(cfg, data, seeds, |_| {})
}

/// As [`run_trials`], calling `on_report` after each finished seed.
pub fn run_trials_with(
    cfg: &ExperimentConfig,
    data: &Dataset,
    seeds: &[u64],
    mut on_report: impl FnMut(&SeedReport),
) -> Result<TrialSummary, TrialsError> {
    if seeds.is_empty() {
        return Err(TrialsError {
            seed: 0,
            source: ModelError::Eval(EvalError::NoSeeds),
            partial: TrialSummary::from_reports(Vec::new()),
        });
    }
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        match run_trial(cfg, data, seed) {
            Ok(r) => {
                on_report(&r);
                reports.push(r);
            }
            Err(source) => {
                return Err(TrialsError {
                    seed,
                    source,
                    partial: TrialSummary::from_reports(reports),
                })
            }
        }
    }
    Ok(TrialSummary::from_reports(reports))
}
