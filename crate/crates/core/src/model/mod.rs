//! Models: SA-GNN (with and without edge types), the first-order baseline,
//! and the content-only linear classifier.

mod baseline;
mod sa_layer;
mod train;

pub use baseline::{
    baseline_forward, expand_first_order, init_user_features, BaselineLayer, BaselineParams, FirstOrderBlock,
    FirstOrderBlocks, UserInit,
};
pub use sa_layer::{sa_layer_forward, sagnn_forward, sagnn_forward_full, SaLayerParams, SagnnParams};
pub use train::{train, HistoryRecord, TrainConfig, TrainOutcome};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::EvalError;
use crate::graph::BipartiteGraph;
use crate::nn::{
    load_checkpoint_into, save_checkpoint, Activation, AggregatorKind, Matrix, NnError, ParamId, ParamStore, Tape, Var,
};
use crate::sampler::{expand_batch, NodeRef, SampleError, WalkConfig};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("sampler produced {blocks} layers for a {layers}-layer model")]
    LayerMismatch { blocks: usize, layers: usize },
    #[error("tweet {0} has no feature row in this layer")]
    MissingRow(u32),
    #[error("node {0:?} has no feature row in this layer")]
    MissingNode(NodeRef),
    #[error("user '{0}' has no adjacent tweets")]
    IsolatedUser(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Sagnn,
    SagnnNoet,
    Baseline,
    ContentOnly,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sagnn" => Some(Self::Sagnn),
            "sagnn-noet" => Some(Self::SagnnNoet),
            "baseline" => Some(Self::Baseline),
            "content-only" => Some(Self::ContentOnly),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sagnn => "sagnn",
            Self::SagnnNoet => "sagnn-noet",
            Self::Baseline => "baseline",
            Self::ContentOnly => "content-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SagnnConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub aggregator: AggregatorKind,
    pub edge_type_aware: bool,
    pub activation: Activation,
}

impl Default for SagnnConfig {
    fn default() -> Self {
        SagnnConfig {
            num_layers: 3,
            hidden_dim: 64,
            aggregator: AggregatorKind::Max,
            edge_type_aware: true,
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub init_strategy: UserInit,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub fanout: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            init_strategy: UserInit::Centroid,
            num_layers: 2,
            hidden_dim: 64,
            fanout: 10,
        }
    }
}

/// Everything needed to rebuild a model's architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub sagnn: SagnnConfig,
    pub baseline: BaselineConfig,
    pub walk: WalkConfig,
    pub classifier_bias: bool,
    /// Drives parameter initialization, user feature initialization and sampling.
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_dim: usize, seed: u64) -> Self {
        ModelSpec {
            kind,
            input_dim,
            sagnn: SagnnConfig::default(),
            baseline: BaselineConfig::default(),
            walk: WalkConfig::default(),
            classifier_bias: false,
            seed,
        }
    }

    fn effective_sagnn(&self) -> SagnnConfig {
        let mut cfg = self.sagnn;
        if self.kind == ModelKind::SagnnNoet {
            cfg.edge_type_aware = false;
        }
        cfg
    }

    fn embedding_dim(&self) -> usize {
        match self.kind {
            ModelKind::Sagnn | ModelKind::SagnnNoet => self.sagnn.hidden_dim,
            ModelKind::Baseline => self.baseline.hidden_dim,
            ModelKind::ContentOnly => self.input_dim,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_dim == 0 {
            return Err(ModelError::Config("input_dim must be positive".into()));
        }
        match self.kind {
            ModelKind::Sagnn | ModelKind::SagnnNoet => {
                if self.sagnn.num_layers == 0 || self.sagnn.hidden_dim == 0 {
                    return Err(ModelError::Config("SA-GNN needs at least one layer and a positive width".into()));
                }
                self.walk.validate()?;
            }
            ModelKind::Baseline => {
                if self.baseline.num_layers == 0 || self.baseline.hidden_dim == 0 || self.baseline.fanout == 0 {
                    return Err(ModelError::Config("baseline needs layers, width and fanout".into()));
                }
            }
            ModelKind::ContentOnly => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Head {
    pub w_o: ParamId,
    pub bias: Option<ParamId>,
}

#[derive(Debug, Clone)]
pub enum Arch {
    Sagnn(SagnnParams),
    Baseline { params: BaselineParams, user_features: Matrix },
    ContentOnly,
}

/// Tape handles for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub embeddings: Var,
    pub logits: Var,
    pub probs: Var,
}

/// Sampling round used for every evaluation pass, so predictions do not
/// depend on batch composition or on how long training ran.
pub const EVAL_ROUND: u64 = u64::MAX;

pub struct Model {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub arch: Arch,
    pub head: Head,
}

impl Model {
    /// Initializes parameters (and, for the baseline, user features) from `spec.seed`.
    pub fn new(spec: ModelSpec, graph: &BipartiteGraph, features: &Matrix) -> Result<Model, ModelError> {
        spec.validate()?;
        if features.cols() != spec.input_dim {
            return Err(ModelError::Config(format!(
                "features have {} columns, model expects {}",
                features.cols(),
                spec.input_dim
            )));
        }
        if features.rows() != graph.num_tweets() {
            return Err(ModelError::Config(format!(
                "{} feature rows for {} tweets",
                features.rows(),
                graph.num_tweets()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut store = ParamStore::default();
        let arch = match spec.kind {
            ModelKind::Sagnn | ModelKind::SagnnNoet => {
                Arch::Sagnn(SagnnParams::init(&mut store, &spec.effective_sagnn(), spec.input_dim, &mut rng))
            }
            ModelKind::Baseline => {
                let params = BaselineParams::init(
                    &mut store,
                    spec.baseline.num_layers,
                    spec.input_dim,
                    spec.baseline.hidden_dim,
                    &mut rng,
                );
                let user_features = init_user_features(graph, features, spec.baseline.init_strategy, &mut rng)?;
                Arch::Baseline { params, user_features }
            }
            ModelKind::ContentOnly => Arch::ContentOnly,
        };
        let d = spec.embedding_dim();
        let w_o = store.add("head.w_o", Matrix::glorot(d, 1, &mut rng));
        let bias = spec.classifier_bias.then(|| store.add("head.bias", Matrix::zeros(1, 1)));
        Ok(Model {
            spec,
            store,
            arch,
            head: Head { w_o, bias },
        })
    }

    fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            rng_seed: self.spec.seed,
            ..self.spec.walk
        }
    }

    /// Records the forward pass for `batch` on `tape`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        graph: &BipartiteGraph,
        features: &Matrix,
        batch: &[u32],
        round: u64,
    ) -> Result<Forward, ModelError> {
        let embeddings = match &self.arch {
            Arch::Sagnn(params) => {
                let cfg = self.spec.effective_sagnn();
                let blocks = expand_batch(graph, batch, &self.walk_config(), cfg.num_layers, round)?;
                sagnn_forward(tape, &self.store, params, &cfg, features, &blocks)?.0
            }
            Arch::Baseline { params, user_features } => {
                let b = &self.spec.baseline;
                let blocks = expand_first_order(graph, batch, b.fanout, b.num_layers, self.spec.seed, round)?;
                baseline_forward(tape, &self.store, params, features, user_features, &blocks)?
            }
            Arch::ContentOnly => {
                let rows: Vec<usize> = batch.iter().map(|&t| t as usize).collect();
                tape.constant(features.gather_rows(&rows))?
            }
        };
        let (logits, probs) = self.classify(tape, embeddings)?;
        Ok(Forward {
            embeddings,
            logits,
            probs,
        })
    }

    /// Sigmoid(W_o z), optionally with a bias.
    pub fn classify(&self, tape: &mut Tape, z: Var) -> Result<(Var, Var), ModelError> {
        let w_o = tape.param(&self.store, self.head.w_o)?;
        let mut logits = tape.matmul(z, w_o)?;
        if let Some(b) = self.head.bias {
            let n = tape.value(logits).rows();
            let bias = tape.param(&self.store, b)?;
            let spread = tape.gather_rows(bias, vec![0; n])?;
            logits = tape.add(logits, spread)?;
        }
        let probs = tape.sigmoid(logits)?;
        Ok((logits, probs))
    }

    /// Logits and embeddings for `ids`, computed in chunks with evaluation sampling.
    pub fn predict(
        &self,
        graph: &BipartiteGraph,
        features: &Matrix,
        ids: &[u32],
        chunk: usize,
    ) -> Result<Prediction, ModelError> {
        let mut logits = Vec::with_capacity(ids.len());
        let mut embeddings = Vec::with_capacity(ids.len());
        let mut dim = self.spec.embedding_dim();
        for part in ids.chunks(chunk.max(1)) {
            let mut tape = Tape::new();
            let f = self.forward(&mut tape, graph, features, part, EVAL_ROUND)?;
            logits.extend_from_slice(tape.value(f.logits).data());
            let z = tape.value(f.embeddings);
            dim = z.cols();
            embeddings.extend_from_slice(z.data());
        }
        Ok(Prediction {
            ids: ids.to_vec(),
            logits,
            embeddings: Matrix::from_vec(ids.len(), dim, embeddings)?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("model.json"), serde_json::to_string_pretty(&self.spec)?)?;
        save_checkpoint(&self.store, &dir.join("params.sagw"))?;
        Ok(())
    }

    pub fn load(dir: &Path, graph: &BipartiteGraph, features: &Matrix) -> Result<Model, ModelError> {
        let spec: ModelSpec = serde_json::from_str(&std::fs::read_to_string(dir.join("model.json"))?)?;
        let mut model = Model::new(spec, graph, features)?;
        load_checkpoint_into(&mut model.store, &dir.join("params.sagw"))?;
        Ok(model)
    }
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub ids: Vec<u32>,
    pub logits: Vec<f64>,
    pub embeddings: Matrix,
}

impl Prediction {
    pub fn probabilities(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| crate::nn::sigmoid(l)).collect()
    }
}
