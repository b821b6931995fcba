//! Second-order neighborhood sampling by length-2 random walks.
//!
//! A walk from a tweet steps to one of its incident edges uniformly (landing
//! on a user), then to one of that user's incident edges uniformly (landing
//! on a tweet). The tweets visited most often across `num_walks` walks form
//! the center's neighborhood. Degree here always means number of incident
//! edges, so a user who both posted and retweeted a tweet is twice as likely
//! to be chosen from it.
//!
//! Every `(round, layer, center)` triple owns an independent ChaCha stream,
//! so results do not depend on the order centers are processed in.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BipartiteGraph, EdgeType};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("tweet index {index} out of range ({count} tweets)")]
    TweetOutOfRange { index: usize, count: usize },
    #[error("user index {index} out of range ({count} users)")]
    UserOutOfRange { index: usize, count: usize },
    #[error("invalid walk config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub num_walks: usize,
    pub top_k: usize,
    pub rng_seed: u64,
    pub exclude_self: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            num_walks: 20,
            top_k: 10,
            rng_seed: 0,
            exclude_self: true,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.num_walks == 0 {
            return Err(SampleError::Config("num_walks must be at least 1"));
        }
        if self.top_k == 0 {
            return Err(SampleError::Config("top_k must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub neighbor: u32,
    /// Type of the edge between the center and the bridging user.
    pub center_edge: EdgeType,
    /// Type of the edge between the bridging user and the neighbor.
    pub neighbor_edge: EdgeType,
    pub visit_count: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeighborhoodStatus {
    Sampled,
    /// Walks only ever returned to the center; holds a single self pair.
    SelfFallback,
    /// The center has no incident edges at all; entries are empty.
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledNeighborhood {
    pub center: u32,
    pub entries: Vec<NeighborEntry>,
    pub status: NeighborhoodStatus,
}

impl SampledNeighborhood {
    /// The neighborhood used for a center that has nothing else to aggregate.
    pub fn self_pair(center: u32) -> Self {
        SampledNeighborhood {
            center,
            entries: vec![NeighborEntry {
                neighbor: center,
                center_edge: EdgeType::Post,
                neighbor_edge: EdgeType::Post,
                visit_count: 0,
                weight: 1.0,
            }],
            status: NeighborhoodStatus::SelfFallback,
        }
    }

    /// Entries to aggregate over, substituting the self pair when empty.
    pub fn effective_entries(&self) -> Vec<NeighborEntry> {
        if self.entries.is_empty() {
            Self::self_pair(self.center).entries
        } else {
            self.entries.clone()
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream identifier for one `(round, layer, node)` sampling job.
pub fn stream_id(round: u64, layer: u64, node: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(round) ^ layer) ^ node)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Default)]
struct Tally {
    total: u32,
    bridges: HashMap<(EdgeType, u32, EdgeType), u32>,
}

/// Runs `cfg.num_walks` length-2 walks from `center` and keeps the top-k tweets.
pub fn sample_neighborhood(
    graph: &BipartiteGraph,
    center: u32,
    cfg: &WalkConfig,
    stream: u64,
) -> Result<SampledNeighborhood, SampleError> {
    cfg.validate()?;
    check_tweet(graph, center)?;
    let t2u = graph.tweet_to_user();
    let u2t = graph.user_to_tweet();
    let deg = t2u.degree(center as usize);
    if deg == 0 {
        return Ok(SampledNeighborhood {
            center,
            entries: Vec::new(),
            status: NeighborhoodStatus::Isolated,
        });
    }

    let mut rng = stream_rng(cfg.rng_seed, stream);
    let mut tallies: BTreeMap<u32, Tally> = BTreeMap::new();
    for _ in 0..cfg.num_walks {
        let (user, center_edge) = t2u.entry(center as usize, rng.gen_range(0..deg));
        let udeg = u2t.degree(user as usize);
        let (tweet, neighbor_edge) = u2t.entry(user as usize, rng.gen_range(0..udeg));
        if cfg.exclude_self && tweet == center {
            continue;
        }
        let tally = tallies.entry(tweet).or_default();
        tally.total += 1;
        *tally.bridges.entry((center_edge, user, neighbor_edge)).or_default() += 1;
    }

    if tallies.is_empty() {
        return Ok(SampledNeighborhood::self_pair(center));
    }

    let mut entries: Vec<NeighborEntry> = tallies
        .into_iter()
        .map(|(neighbor, tally)| {
            // most traversed bridge; ties prefer a post center edge, then the lower user
            let (&(center_edge, _, neighbor_edge), _) = tally
                .bridges
                .iter()
                .max_by(|(ka, ca), (kb, cb)| ca.cmp(cb).then_with(|| kb.cmp(ka)))
                .expect("tally has at least one bridge");
            NeighborEntry {
                neighbor,
                center_edge,
                neighbor_edge,
                visit_count: tally.total,
                weight: 0.0,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.visit_count.cmp(&a.visit_count).then(a.neighbor.cmp(&b.neighbor)));
    entries.truncate(cfg.top_k);
    let total: u32 = entries.iter().map(|e| e.visit_count).sum();
    for e in &mut entries {
        e.weight = f64::from(e.visit_count) / f64::from(total);
    }
    Ok(SampledNeighborhood {
        center,
        entries,
        status: NeighborhoodStatus::Sampled,
    })
}

/// Exact landing distribution of one length-2 walk from `center`.
///
/// With `exclude_self` the center's own mass is dropped and the rest
/// renormalized; if nothing remains the map is empty.
pub fn exact_two_step_distribution(
    graph: &BipartiteGraph,
    center: u32,
    exclude_self: bool,
) -> Result<BTreeMap<u32, f64>, SampleError> {
    check_tweet(graph, center)?;
    let t2u = graph.tweet_to_user();
    let u2t = graph.user_to_tweet();
    let deg = t2u.degree(center as usize);
    let mut dist: BTreeMap<u32, f64> = BTreeMap::new();
    if deg == 0 {
        return Ok(dist);
    }
    for &user in t2u.targets(center as usize) {
        let udeg = u2t.degree(user as usize);
        let p = 1.0 / (deg as f64 * udeg as f64);
        for &t in u2t.targets(user as usize) {
            *dist.entry(t).or_default() += p;
        }
    }
    if exclude_self {
        dist.remove(&center);
        let mass: f64 = dist.values().sum();
        if mass <= 0.0 {
            dist.clear();
        } else {
            dist.values_mut().for_each(|p| *p /= mass);
        }
    }
    Ok(dist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeRef {
    Tweet(u32),
    User(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstOrderSample {
    /// Distinct neighbors on the opposite side, sorted.
    pub neighbors: Vec<(u32, EdgeType)>,
    /// Set when the node had no incident edges.
    pub empty: bool,
}

/// Draws `k` incident edges uniformly with replacement, then deduplicates.
pub fn sample_first_order(
    graph: &BipartiteGraph,
    node: NodeRef,
    k: usize,
    seed: u64,
    stream: u64,
) -> Result<FirstOrderSample, SampleError> {
    let (csr, row) = match node {
        NodeRef::Tweet(t) => {
            check_tweet(graph, t)?;
            (graph.tweet_to_user(), t as usize)
        }
        NodeRef::User(u) => {
            if u as usize >= graph.num_users() {
                return Err(SampleError::UserOutOfRange {
                    index: u as usize,
                    count: graph.num_users(),
                });
            }
            (graph.user_to_tweet(), u as usize)
        }
    };
    let deg = csr.degree(row);
    if deg == 0 {
        return Ok(FirstOrderSample {
            neighbors: Vec::new(),
            empty: true,
        });
    }
    let mut rng = stream_rng(seed, stream);
    let mut picked: Vec<(u32, EdgeType)> = (0..k).map(|_| csr.entry(row, rng.gen_range(0..deg))).collect();
    picked.sort_unstable();
    picked.dedup();
    Ok(FirstOrderSample {
        neighbors: picked,
        empty: false,
    })
}

/// Neighborhoods for one layer's centers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBlock {
    pub centers: Vec<u32>,
    pub neighborhoods: Vec<SampledNeighborhood>,
}

/// Per-layer sampling plan for a mini-batch.
///
/// `layers[0]` is the first layer (closest to the input features) and
/// `layers[L-1]` has the batch as its centers. `input_nodes` lists the
/// tweets whose raw features the first layer reads.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchBlocks {
    pub layers: Vec<LayerBlock>,
    pub input_nodes: Vec<u32>,
}

impl BatchBlocks {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }
}

/// Expands a batch into layer-wise frontiers, sampling every layer afresh.
///
/// `round` distinguishes repeated expansions of the same centers (e.g.
/// successive training steps).
pub fn expand_batch(
    graph: &BipartiteGraph,
    batch: &[u32],
    cfg: &WalkConfig,
    num_layers: usize,
    round: u64,
) -> Result<BatchBlocks, SampleError> {
    if num_layers == 0 {
        return Err(SampleError::Config("num_layers must be at least 1"));
    }
    let mut layers_rev: Vec<LayerBlock> = Vec::with_capacity(num_layers);
    let mut centers = dedup_in_order(batch.iter().copied());
    for layer in (1..=num_layers).rev() {
        let neighborhoods = centers
            .iter()
            .map(|&c| sample_neighborhood(graph, c, cfg, stream_id(round, layer as u64, u64::from(c))))
            .collect::<Result<Vec<_>, _>>()?;
        let next = frontier(&centers, &neighborhoods);
        layers_rev.push(LayerBlock {
            centers,
            neighborhoods,
        });
        centers = next;
    }
    layers_rev.reverse();
    Ok(BatchBlocks {
        layers: layers_rev,
        input_nodes: centers,
    })
}

/// Centers followed by every sampled neighbor not already present.
fn frontier(centers: &[u32], neighborhoods: &[SampledNeighborhood]) -> Vec<u32> {
    dedup_in_order(
        centers
            .iter()
            .copied()
            .chain(neighborhoods.iter().flat_map(|n| n.entries.iter().map(|e| e.neighbor))),
    )
}

fn dedup_in_order(it: impl Iterator<Item = u32>) -> Vec<u32> {
    let mut seen = HashSet::new();
    it.filter(|x| seen.insert(*x)).collect()
}

/// One neighborhood per tweet, drawn once and reused by every layer.
pub fn sample_all(graph: &BipartiteGraph, cfg: &WalkConfig, round: u64) -> Result<Vec<SampledNeighborhood>, SampleError> {
    (0..graph.num_tweets() as u32)
        .map(|c| sample_neighborhood(graph, c, cfg, stream_id(round, 0, u64::from(c))))
        .collect()
}

/// Writes `center neighbor center_edge neighbor_edge count weight` rows.
pub fn write_neighborhood_tsv<W: Write>(
    mut w: W,
    graph: &BipartiteGraph,
    neighborhoods: &[SampledNeighborhood],
) -> std::io::Result<()> {
    let ids = graph.tweet_ids();
    for n in neighborhoods {
        for e in &n.entries {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                ids[n.center as usize],
                ids[e.neighbor as usize],
                e.center_edge,
                e.neighbor_edge,
                e.visit_count,
                e.weight
            )?;
        }
    }
    Ok(())
}

fn check_tweet(graph: &BipartiteGraph, t: u32) -> Result<(), SampleError> {
    if t as usize >= graph.num_tweets() {
        Err(SampleError::TweetOutOfRange {
            index: t as usize,
            count: graph.num_tweets(),
        })
    } else {
        Ok(())
    }
}
