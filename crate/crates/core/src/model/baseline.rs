//! First-order mean-aggregation GNN over the full bipartite graph.
//!
//! Users are featured nodes here, so they need initial features; see
//! [`init_user_features`]. Each layer computes
//! `h_v = relu(h_v W_self + mean(h_u : u in N(v)) W_nei)` followed by row
//! normalization, with the same weights for tweets and users.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::graph::BipartiteGraph;
use crate::nn::{Activation, AggregatorKind, Matrix, ParamId, ParamStore, Tape, Var};
use crate::sampler::{sample_first_order, stream_id, NodeRef};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserInit {
    Random,
    Centroid,
    Medoid,
}

impl UserInit {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(Self::Random),
            "centroid" => Some(Self::Centroid),
            "medoid" => Some(Self::Medoid),
            _ => None,
        }
    }
}

/// One feature row per user, in graph user order.
pub fn init_user_features<R: Rng>(
    graph: &BipartiteGraph,
    tweet_features: &Matrix,
    strategy: UserInit,
    rng: &mut R,
) -> Result<Matrix, ModelError> {
    let dim = tweet_features.cols();
    let u2t = graph.user_to_tweet();
    let mut out = Matrix::zeros(graph.num_users(), dim);
    for u in 0..graph.num_users() {
        // a user may hold both a post and a retweet edge to one tweet
        let mut tweets: Vec<u32> = u2t.targets(u).to_vec();
        tweets.dedup();
        if tweets.is_empty() {
            return Err(ModelError::IsolatedUser(graph.user_ids()[u].clone()));
        }
        let row = out.row_mut(u);
        match strategy {
            UserInit::Random => {
                let scale = 1.0 / (dim as f64).sqrt();
                for x in row.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = z * scale;
                }
            }
            UserInit::Centroid => {
                for &t in &tweets {
                    for (o, v) in row.iter_mut().zip(tweet_features.row(t as usize)) {
                        *o += v;
                    }
                }
                let n = tweets.len() as f64;
                row.iter_mut().for_each(|x| *x /= n);
            }
            UserInit::Medoid => {
                let mut best = (f64::INFINITY, tweets[0]);
                for &a in &tweets {
                    let ra = tweet_features.row(a as usize);
                    let cost: f64 = tweets
                        .iter()
                        .map(|&b| {
                            ra.iter()
                                .zip(tweet_features.row(b as usize))
                                .map(|(x, y)| (x - y) * (x - y))
                                .sum::<f64>()
                        })
                        .sum();
                    // tweets are sorted, so strict < keeps the lowest index on ties
                    if cost < best.0 {
                        best = (cost, a);
                    }
                }
                row.copy_from_slice(tweet_features.row(best.1 as usize));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineLayer {
    pub w_self: ParamId,
    pub w_nei: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineParams {
    pub layers: Vec<BaselineLayer>,
}

impl BaselineParams {
    pub fn init<R: Rng>(store: &mut ParamStore, num_layers: usize, input_dim: usize, dim: usize, rng: &mut R) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let in_dim = if l == 0 { input_dim } else { dim };
                BaselineLayer {
                    w_self: store.add(format!("base{}.w_self", l + 1), Matrix::glorot(in_dim, dim, rng)),
                    w_nei: store.add(format!("base{}.w_nei", l + 1), Matrix::glorot(in_dim, dim, rng)),
                }
            })
            .collect();
        BaselineParams { layers }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderBlock {
    pub centers: Vec<NodeRef>,
    pub neighbors: Vec<Vec<NodeRef>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderBlocks {
    pub layers: Vec<FirstOrderBlock>,
    pub input_nodes: Vec<NodeRef>,
}

fn node_code(n: NodeRef) -> u64 {
    match n {
        NodeRef::Tweet(t) => u64::from(t) << 1,
        NodeRef::User(u) => (u64::from(u) << 1) | 1,
    }
}

/// Layer-wise first-order frontier expansion with `fanout` draws per node.
pub fn expand_first_order(
    graph: &BipartiteGraph,
    batch: &[u32],
    fanout: usize,
    num_layers: usize,
    seed: u64,
    round: u64,
) -> Result<FirstOrderBlocks, ModelError> {
    let mut seen = HashSet::new();
    let mut centers: Vec<NodeRef> = batch.iter().map(|&t| NodeRef::Tweet(t)).filter(|n| seen.insert(*n)).collect();
    let mut rev = Vec::with_capacity(num_layers);
    for layer in (1..=num_layers).rev() {
        let mut neighbors = Vec::with_capacity(centers.len());
        for &c in &centers {
            let s = sample_first_order(graph, c, fanout, seed, stream_id(round, layer as u64, node_code(c)))?;
            let nb: Vec<NodeRef> = s
                .neighbors
                .iter()
                .map(|&(idx, _)| match c {
                    NodeRef::Tweet(_) => NodeRef::User(idx),
                    NodeRef::User(_) => NodeRef::Tweet(idx),
                })
                .collect::<Vec<_>>();
            let mut nb = nb;
            nb.dedup();
            neighbors.push(nb);
        }
        let mut seen = HashSet::new();
        let next: Vec<NodeRef> = centers
            .iter()
            .copied()
            .chain(neighbors.iter().flatten().copied())
            .filter(|n| seen.insert(*n))
            .collect();
        rev.push(FirstOrderBlock { centers, neighbors });
        centers = next;
    }
    rev.reverse();
    Ok(FirstOrderBlocks {
        layers: rev,
        input_nodes: centers,
    })
}

/// Returns the unit-norm embeddings of the batch tweets.
pub fn baseline_forward(
    tape: &mut Tape,
    store: &ParamStore,
    params: &BaselineParams,
    tweet_features: &Matrix,
    user_features: &Matrix,
    blocks: &FirstOrderBlocks,
) -> Result<Var, ModelError> {
    if blocks.layers.len() != params.layers.len() {
        return Err(ModelError::LayerMismatch {
            blocks: blocks.layers.len(),
            layers: params.layers.len(),
        });
    }
    if user_features.cols() != tweet_features.cols() {
        return Err(ModelError::Config("user and tweet feature widths differ".into()));
    }
    let mut input = Matrix::zeros(blocks.input_nodes.len(), tweet_features.cols());
    for (i, n) in blocks.input_nodes.iter().enumerate() {
        let src = match *n {
            NodeRef::Tweet(t) => tweet_features.row(t as usize),
            NodeRef::User(u) => user_features.row(u as usize),
        };
        input.row_mut(i).copy_from_slice(src);
    }
    let mut h = tape.constant(input)?;
    let mut rows: HashMap<NodeRef, usize> = blocks.input_nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    for (layer, block) in params.layers.iter().zip(&blocks.layers) {
        let lookup = |n: NodeRef| rows.get(&n).copied().ok_or(ModelError::MissingNode(n));
        let mut self_rows = Vec::with_capacity(block.centers.len());
        let mut nei_rows = Vec::new();
        let mut offsets = vec![0];
        for (c, nb) in block.centers.iter().zip(&block.neighbors) {
            self_rows.push(lookup(*c)?);
            if nb.is_empty() {
                nei_rows.push(lookup(*c)?);
            }
            for n in nb {
                nei_rows.push(lookup(*n)?);
            }
            offsets.push(nei_rows.len());
        }
        let hs = tape.gather_rows(h, self_rows)?;
        let hn = tape.gather_rows(h, nei_rows)?;
        let agg = tape.aggregate(hn, offsets, AggregatorKind::Mean, Vec::new())?;
        let ws = tape.param(store, layer.w_self)?;
        let wn = tape.param(store, layer.w_nei)?;
        let a = tape.matmul(hs, ws)?;
        let b = tape.matmul(agg, wn)?;
        let sum = tape.add(a, b)?;
        let act = tape.activate(sum, Activation::Relu)?;
        h = tape.row_l2_normalize(act)?;
        rows = block.centers.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::toy_graph;
    use crate::graph::{build_graph, EdgeRecord, EdgeType};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_user_graph(n: usize) -> BipartiteGraph {
        let edges: Vec<_> = (0..n)
            .map(|i| EdgeRecord::new(format!("t{i}"), "u", EdgeType::Post))
            .collect();
        build_graph(&edges, true).unwrap()
    }

    #[test]
    fn centroid_is_mean() {
        let g = one_user_graph(2);
        let f = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 4.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = init_user_features(&g, &f, UserInit::Centroid, &mut rng).unwrap();
        assert_eq!(u.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn medoid_minimizes_squared_distance_sum() {
        let g = one_user_graph(3);
        let pts = [vec![0.0, 0.0], vec![1.0, 0.0], vec![10.0, 10.0]];
        let f = Matrix::from_rows(&pts).unwrap();
        // brute-force sums of squared distances
        let sums: Vec<f64> = pts
            .iter()
            .map(|a| pts.iter().map(|b| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sum())
            .collect();
        assert_eq!(sums, vec![201.0, 182.0, 381.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = init_user_features(&g, &f, UserInit::Medoid, &mut rng).unwrap();
        assert_eq!(u.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn single_tweet_user_centroid_equals_medoid() {
        let g = one_user_graph(1);
        let f = Matrix::from_rows(&[vec![0.3, -0.7]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = init_user_features(&g, &f, UserInit::Centroid, &mut rng).unwrap();
        let m = init_user_features(&g, &f, UserInit::Medoid, &mut rng).unwrap();
        assert_eq!(c, m);
        assert_eq!(c.row(0), f.row(0));
    }

    #[test]
    fn random_init_scaled() {
        let edges: Vec<_> = (0..2000)
            .map(|i| EdgeRecord::new(format!("t{i}"), format!("u{i}"), EdgeType::Post))
            .collect();
        let g = build_graph(&edges, true).unwrap();
        let f = Matrix::zeros(2000, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = init_user_features(&g, &f, UserInit::Random, &mut rng).unwrap();
        let var = u.data().iter().map(|x| x * x).sum::<f64>() / u.data().len() as f64;
        assert!((var - 1.0 / 16.0).abs() < 0.005, "variance {var}");
    }

    #[test]
    fn two_layer_receptive_field_on_toy_graph() {
        let g = toy_graph();
        let a = g.tweet_index("A").unwrap();
        let blocks = expand_first_order(&g, &[a], 64, 2, 1, 0).unwrap();
        let touched: HashSet<NodeRef> = blocks.input_nodes.iter().copied().collect();
        // oracle: every node within two hops of A
        let mut expected = HashSet::new();
        expected.insert(NodeRef::Tweet(a));
        for u in g.first_order_users(a) {
            expected.insert(NodeRef::User(u));
            for &t in g.user_to_tweet().targets(u as usize) {
                expected.insert(NodeRef::Tweet(t));
            }
        }
        assert_eq!(touched, expected);
        assert_eq!(touched.len(), 6);
    }
}
