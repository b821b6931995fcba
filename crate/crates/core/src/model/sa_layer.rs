//! The skip-aggregation layer and the stacked SA-GNN forward pass.

use std::collections::HashMap;

use rand::Rng;

use crate::graph::EdgeType;
use crate::nn::{Activation, AggregatorKind, Matrix, ParamId, ParamStore, Tape, Var};
use crate::sampler::{BatchBlocks, SampledNeighborhood};

use super::{ModelError, SagnnConfig};

/// Transforms of one SA layer. Index 0 is the post edge type, 1 retweet.
///
/// Without edge-type awareness both entries of `w_cen` (and of `w_nei`)
/// hold the same parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaLayerParams {
    pub w_cen: [ParamId; 2],
    pub w_nei: [ParamId; 2],
    pub w_c: ParamId,
}

impl SaLayerParams {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        dim: usize,
        edge_type_aware: bool,
        rng: &mut R,
    ) -> Self {
        let pair = |store: &mut ParamStore, role: &str, rng: &mut R| {
            if edge_type_aware {
                let post = store.add(format!("{prefix}.{role}_post"), Matrix::glorot(in_dim, dim, rng));
                let rt = store.add(format!("{prefix}.{role}_retweet"), Matrix::glorot(in_dim, dim, rng));
                [post, rt]
            } else {
                let shared = store.add(format!("{prefix}.{role}_shared"), Matrix::glorot(in_dim, dim, rng));
                [shared, shared]
            }
        };
        let w_cen = pair(store, "w_cen", rng);
        let w_nei = pair(store, "w_nei", rng);
        let w_c = store.add(format!("{prefix}.w_c"), Matrix::glorot(2 * dim, dim, rng));
        SaLayerParams { w_cen, w_nei, w_c }
    }

    pub fn is_shared(&self) -> bool {
        self.w_cen[0] == self.w_cen[1] && self.w_nei[0] == self.w_nei[1]
    }
}

fn type_slot(t: EdgeType) -> usize {
    match t {
        EdgeType::Post => 0,
        EdgeType::Retweet => 1,
    }
}

/// Selects, per row, the transformed row matching that row's edge type.
fn typed_rows(
    tape: &mut Tape,
    store: &ParamStore,
    h_prev: Var,
    weights: [ParamId; 2],
    rows: &[usize],
    types: &[EdgeType],
) -> Result<Var, ModelError> {
    if weights[0] == weights[1] {
        let w = tape.param(store, weights[0])?;
        let t = tape.matmul(h_prev, w)?;
        return Ok(tape.gather_rows(t, rows.to_vec())?);
    }
    let mut acc: Option<Var> = None;
    for (slot, &id) in weights.iter().enumerate() {
        let mask: Vec<f64> = types.iter().map(|&t| f64::from(u8::from(type_slot(t) == slot))).collect();
        if mask.iter().all(|&m| m == 0.0) {
            continue;
        }
        let w = tape.param(store, id)?;
        let t = tape.matmul(h_prev, w)?;
        let g = tape.gather_rows(t, rows.to_vec())?;
        let part = tape.scale_rows(g, mask)?;
        acc = Some(match acc {
            None => part,
            Some(prev) => tape.add(prev, part)?,
        });
    }
    Ok(acc.expect("at least one edge type present"))
}

/// One SA layer over a set of centers.
///
/// `h_prev` holds the previous layer's features; `rows` maps each tweet
/// index to its row in `h_prev` and must cover every center and neighbor.
/// Output row `i` belongs to `neighborhoods[i].center`. Normalization is
/// left to the caller.
pub fn sa_layer_forward(
    tape: &mut Tape,
    store: &ParamStore,
    layer: &SaLayerParams,
    h_prev: Var,
    rows: &HashMap<u32, usize>,
    neighborhoods: &[SampledNeighborhood],
    aggregator: AggregatorKind,
    activation: Activation,
) -> Result<Var, ModelError> {
    let lookup = |t: u32| rows.get(&t).copied().ok_or(ModelError::MissingRow(t));
    let mut center_rows = Vec::new();
    let mut neighbor_rows = Vec::new();
    let mut center_types = Vec::new();
    let mut neighbor_types = Vec::new();
    let mut weights = Vec::new();
    let mut offsets = vec![0];
    for n in neighborhoods {
        let c = lookup(n.center)?;
        for e in n.effective_entries() {
            center_rows.push(c);
            neighbor_rows.push(lookup(e.neighbor)?);
            center_types.push(e.center_edge);
            neighbor_types.push(e.neighbor_edge);
            weights.push(e.weight);
        }
        offsets.push(center_rows.len());
    }
    if neighborhoods.is_empty() {
        return Err(ModelError::Config("no centers in layer".into()));
    }

    let cen = typed_rows(tape, store, h_prev, layer.w_cen, &center_rows, &center_types)?;
    let nei = typed_rows(tape, store, h_prev, layer.w_nei, &neighbor_rows, &neighbor_types)?;
    let pairs = tape.concat_cols(cen, nei)?;
    let pairs = tape.activate(pairs, activation)?;
    let agg = tape.aggregate(pairs, offsets, aggregator, weights)?;
    let w_c = tape.param(store, layer.w_c)?;
    let h = tape.matmul(agg, w_c)?;
    Ok(tape.activate(h, activation)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SagnnParams {
    pub layers: Vec<SaLayerParams>,
}

impl SagnnParams {
    pub fn init<R: Rng>(store: &mut ParamStore, cfg: &SagnnConfig, input_dim: usize, rng: &mut R) -> Self {
        let layers = (0..cfg.num_layers)
            .map(|l| {
                let in_dim = if l == 0 { input_dim } else { cfg.hidden_dim };
                SaLayerParams::init(store, &format!("layer{}", l + 1), in_dim, cfg.hidden_dim, cfg.edge_type_aware, rng)
            })
            .collect();
        SagnnParams { layers }
    }
}

/// Mini-batch SA-GNN forward. Returns the unit-norm embeddings of the
/// final layer's centers (the batch, in order) and every layer's output.
pub fn sagnn_forward(
    tape: &mut Tape,
    store: &ParamStore,
    params: &SagnnParams,
    cfg: &SagnnConfig,
    features: &Matrix,
    blocks: &BatchBlocks,
) -> Result<(Var, Vec<Var>), ModelError> {
    if blocks.num_layers() != params.layers.len() {
        return Err(ModelError::LayerMismatch {
            blocks: blocks.num_layers(),
            layers: params.layers.len(),
        });
    }
    let input_rows: Vec<usize> = blocks.input_nodes.iter().map(|&t| t as usize).collect();
    if let Some(&bad) = input_rows.iter().find(|&&r| r >= features.rows()) {
        return Err(ModelError::MissingRow(bad as u32));
    }
    let mut h = tape.constant(features.gather_rows(&input_rows))?;
    let mut rows: HashMap<u32, usize> = blocks.input_nodes.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut outputs = Vec::with_capacity(params.layers.len());
    for (layer, block) in params.layers.iter().zip(&blocks.layers) {
        let raw = sa_layer_forward(tape, store, layer, h, &rows, &block.neighborhoods, cfg.aggregator, cfg.activation)?;
        h = tape.row_l2_normalize(raw)?;
        outputs.push(h);
        rows = block.centers.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    }
    Ok((h, outputs))
}

/// Every tweet updated at every layer with one fixed neighborhood per
/// tweet. `neighborhoods[t]` must belong to tweet `t`.
pub fn sagnn_forward_full(
    tape: &mut Tape,
    store: &ParamStore,
    params: &SagnnParams,
    cfg: &SagnnConfig,
    features: &Matrix,
    neighborhoods: &[SampledNeighborhood],
) -> Result<Vec<Var>, ModelError> {
    if neighborhoods.len() != features.rows() {
        return Err(ModelError::Config(format!(
            "{} neighborhoods for {} tweets",
            neighborhoods.len(),
            features.rows()
        )));
    }
    if let Some((i, n)) = neighborhoods.iter().enumerate().find(|(i, n)| n.center as usize != *i) {
        return Err(ModelError::Config(format!("neighborhood {i} belongs to tweet {}", n.center)));
    }
    let rows: HashMap<u32, usize> = (0..features.rows()).map(|i| (i as u32, i)).collect();
    let mut h = tape.constant(features.clone())?;
    let mut outputs = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let raw = sa_layer_forward(tape, store, layer, h, &rows, neighborhoods, cfg.aggregator, cfg.activation)?;
        h = tape.row_l2_normalize(raw)?;
        outputs.push(h);
    }
    Ok(outputs)
}
