//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sagnn::dataset::{Dataset, Embeddings};
use sagnn::graph::{build_graph, BipartiteGraph, EdgeRecord, EdgeType};
use sagnn::nn::{AggregatorKind, Matrix, ParamStore, Tape, Var};
use sagnn::sampler::SampledNeighborhood;
use sagnn::synth::{generate, SynthConfig};
use sagnn::weak_label::{HashtagLexicon, Polarity, RawPost};

pub mod checks;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// A random bipartite edge list: every tweet has one author, plus random retweets.
pub fn random_edges(r: &mut ChaCha8Rng, tweets: usize, users: usize, retweets: usize) -> Vec<EdgeRecord> {
    let mut edges = Vec::new();
    for t in 0..tweets {
        let author = r.gen_range(0..users);
        edges.push(EdgeRecord::new(format!("t{t}"), format!("u{author}"), EdgeType::Post));
    }
    for _ in 0..retweets {
        let t = r.gen_range(0..tweets);
        let u = r.gen_range(0..users);
        edges.push(EdgeRecord::new(format!("t{t}"), format!("u{u}"), EdgeType::Retweet));
    }
    edges
}

pub fn random_graph(seed: u64, tweets: usize, users: usize, retweets: usize) -> BipartiteGraph {
    let mut r = rng(seed);
    build_graph(&random_edges(&mut r, tweets, users, retweets), true).unwrap()
}

pub fn synth_dataset(cfg: &SynthConfig) -> Dataset {
    let c = generate(cfg).unwrap();
    let graph = build_graph(&c.edges, true).unwrap();
    let emb = Embeddings {
        ids: c.ids.clone(),
        rows: c.features.clone(),
    };
    let labels: Vec<(String, u8)> = c.ids.iter().cloned().zip(c.labels.iter().copied()).collect();
    let low: Vec<(String, u8)> = c.ids.iter().cloned().zip(c.low_signal.iter().map(|&b| u8::from(b))).collect();
    Dataset::assemble(graph, &emb, &labels, Some(&low)).unwrap()
}

// ---------------------------------------------------------------------------
// Finite differences

/// Largest relative error between backward-pass gradients and central
/// differences over every parameter entry. The denominator is floored at
/// 1e-4, so tiny gradients are held to an absolute 1e-8.
pub fn max_grad_error(store: &mut ParamStore, loss_fn: &dyn Fn(&mut Tape, &ParamStore) -> Var) -> f64 {
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store);
    store.zero_grad();
    tape.backward(loss, store).unwrap();
    let analytic: Vec<Matrix> = store.iter().map(|p| p.grad.clone()).collect();

    let eval = |store: &ParamStore| {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, store);
        tape.value(loss)[(0, 0)]
    };
    let h = 1e-6;
    let ids: Vec<_> = store.ids().collect();
    let mut worst: f64 = 0.0;
    for (pi, id) in ids.into_iter().enumerate() {
        let n = store.get(id).value.data().len();
        for k in 0..n {
            let orig = store.get(id).value.data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + h;
            let up = eval(store);
            store.get_mut(id).value.data_mut()[k] = orig - h;
            let down = eval(store);
            store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi].data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Reduces any matrix to a scalar loss through a fixed random projection,
/// a sigmoid and binary cross-entropy.
pub fn scalarize(tape: &mut Tape, y: Var, seed: u64) -> Var {
    let mut r = rng(seed ^ 0x5eed);
    let (rows, cols) = tape.value(y).shape();
    let proj = tape.constant(random_matrix(&mut r, cols, 1)).unwrap();
    let logits = tape.matmul(y, proj).unwrap();
    let probs = tape.sigmoid(logits).unwrap();
    let labels: Vec<f64> = (0..rows).map(|_| f64::from(r.gen_range(0..2u8))).collect();
    tape.bce_loss(probs, &labels).unwrap()
}

// ---------------------------------------------------------------------------
// Skip-aggregation reference written with plain loops

fn vec_mat(h: &[f64], w: &Matrix) -> Vec<f64> {
    let (rows, cols) = w.shape();
    assert_eq!(h.len(), rows);
    (0..cols).map(|j| (0..rows).map(|i| h[i] * w[(i, j)]).sum()).collect()
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

fn slot(t: EdgeType) -> usize {
    match t {
        EdgeType::Post => 0,
        EdgeType::Retweet => 1,
    }
}

/// Weight matrices of one layer, looked up by parameter name.
pub struct LayerWeights {
    pub cen: [Matrix; 2],
    pub nei: [Matrix; 2],
    pub comb: Matrix,
}

pub fn layer_weights(store: &ParamStore, layer: usize, aware: bool) -> LayerWeights {
    let get = |name: String| store.get(store.find(&name).unwrap_or_else(|| panic!("{name}"))).value.clone();
    let pair = |role: &str| {
        if aware {
            [
                get(format!("layer{layer}.{role}_post")),
                get(format!("layer{layer}.{role}_retweet")),
            ]
        } else {
            let m = get(format!("layer{layer}.{role}_shared"));
            [m.clone(), m]
        }
    };
    LayerWeights {
        cen: pair("w_cen"),
        nei: pair("w_nei"),
        comb: get(format!("layer{layer}.w_c")),
    }
}

/// One SA layer for center `v`: transform each center-neighbor pair by its
/// edge types, concatenate, activate, aggregate, combine, activate.
pub fn reference_sa_update(
    h: &[Vec<f64>],
    nb: &SampledNeighborhood,
    w: &LayerWeights,
    agg: AggregatorKind,
) -> Vec<f64> {
    let v = nb.center as usize;
    // a center without sampled neighbors pairs with itself through post edges
    let pairs: Vec<(usize, EdgeType, EdgeType, f64)> = if nb.entries.is_empty() {
        vec![(v, EdgeType::Post, EdgeType::Post, 1.0)]
    } else {
        nb.entries
            .iter()
            .map(|e| (e.neighbor as usize, e.center_edge, e.neighbor_edge, e.weight))
            .collect()
    };
    let reps: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(u, ev, eu, _)| {
            let mut cat = vec_mat(&h[v], &w.cen[slot(ev)]);
            cat.extend(vec_mat(&h[u], &w.nei[slot(eu)]));
            relu(cat)
        })
        .collect();
    let width = reps[0].len();
    let mut a = vec![0.0; width];
    match agg {
        AggregatorKind::Mean | AggregatorKind::Sum => {
            for rep in &reps {
                for j in 0..width {
                    a[j] += rep[j];
                }
            }
            if agg == AggregatorKind::Mean {
                a.iter_mut().for_each(|x| *x /= reps.len() as f64);
            }
        }
        AggregatorKind::Max => {
            for j in 0..width {
                a[j] = reps.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
            }
        }
        AggregatorKind::WeightedSum => {
            for (rep, p) in reps.iter().zip(&pairs) {
                for j in 0..width {
                    a[j] += p.3 * rep[j];
                }
            }
        }
    }
    relu(vec_mat(&a, &w.comb))
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

/// Full-graph forward, layer by layer, every tweet updated from the
/// previous layer's representations and then scaled to unit length.
pub fn reference_algorithm(
    features: &Matrix,
    neighborhoods: &[SampledNeighborhood],
    store: &ParamStore,
    num_layers: usize,
    aware: bool,
    agg: AggregatorKind,
) -> Vec<Vec<Vec<f64>>> {
    let mut h: Vec<Vec<f64>> = (0..features.rows()).map(|i| features.row(i).to_vec()).collect();
    let mut layers = Vec::new();
    for l in 1..=num_layers {
        let w = layer_weights(store, l, aware);
        let next: Vec<Vec<f64>> = neighborhoods
            .iter()
            .map(|nb| unit(reference_sa_update(&h, nb, &w, agg)))
            .collect();
        h = next;
        layers.push(h.clone());
    }
    layers
}

// ---------------------------------------------------------------------------
// Metrics by enumeration

/// AUC as the fraction of positive-negative pairs ranked correctly, ties half.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut twice_wins = 0u64;
    let (mut pos, mut neg) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            pos += 1;
        } else {
            neg += 1;
        }
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj == 1 {
                continue;
            }
            if scores[i] > scores[j] {
                twice_wins += 2;
            } else if scores[i] == scores[j] {
                twice_wins += 1;
            }
        }
    }
    (pos > 0 && neg > 0).then(|| twice_wins as f64 / (2 * pos * neg) as f64)
}

// ---------------------------------------------------------------------------
// Weak labeling by direct rule application

/// Character-level hashtag scanner.
pub fn scan_tags(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '#' {
            let mut j = i + 1;
            let mut tag = String::new();
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                tag.extend(chars[j].to_lowercase());
                j += 1;
            }
            if !tag.is_empty() {
                out.push(tag);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Expected (id, label, retweeters) per surviving post, applying the rules
/// one post at a time.
pub fn expected_labeling(posts: &[RawPost], lexicon: &HashtagLexicon) -> BTreeMap<String, (u8, Vec<String>)> {
    let originals: HashMap<&str, usize> = posts
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.text.starts_with("RT @"))
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let mut folded: Vec<Vec<String>> = vec![Vec::new(); posts.len()];
    for p in posts.iter().filter(|p| p.text.starts_with("RT @")) {
        if let Some(&i) = p.retweet_of.as_deref().and_then(|id| originals.get(id)) {
            folded[i].push(p.author.clone());
        }
    }
    let mut out = BTreeMap::new();
    for (i, p) in posts.iter().enumerate() {
        if p.text.starts_with("RT @") {
            continue;
        }
        let pols: Vec<Polarity> = scan_tags(&p.text).iter().filter_map(|t| lexicon.polarity(t)).collect();
        let Some(&first) = pols.first() else { continue };
        if pols.iter().any(|&q| q != first) {
            continue;
        }
        let label = if first == Polarity::ProA { 0 } else { 1 };
        let mut rts: Vec<String> = Vec::new();
        for u in p.retweeters.iter().chain(&folded[i]) {
            if !rts.contains(u) {
                rts.push(u.clone());
            }
        }
        out.insert(p.id.clone(), (label, rts));
    }
    out
}

pub const PRO_A: [&str; 4] = ["VoteBlue", "bidenharris", "TraitorTrump", "blue_wave"];
pub const PRO_B: [&str; 4] = ["MAGA", "maga2020", "trump2020", "KAG"];
pub const NEUTRAL: [&str; 5] = ["election", "vote2020", "news", "debate", "usa"];

pub fn planted_lexicon() -> HashtagLexicon {
    HashtagLexicon::from_seeds(
        PRO_A
            .iter()
            .map(|t| (*t, Polarity::ProA))
            .chain(PRO_B.iter().map(|t| (*t, Polarity::ProB))),
    )
    .unwrap()
}

/// Posts with planted stance tags in varied casing and punctuation, mixed
/// and tagless posts, and retweets with known, unknown or missing originals.
pub fn planted_corpus(n: usize, seed: u64) -> Vec<RawPost> {
    let mut r = rng(seed);
    let words = ["the", "polls", "tonight", "great", "again", "win", "count", "every", "state"];
    let punct = ["", "!", ".", ",", "?", ":)"];
    let mut posts: Vec<RawPost> = Vec::with_capacity(n);
    for i in 0..n {
        let author = format!("user{}", r.gen_range(0..80));
        if i > 10 && r.gen_bool(0.15) {
            let target = match r.gen_range(0..3) {
                0 => None,
                1 => Some(format!("missing{i}")),
                _ => Some(posts[r.gen_range(0..i)].id.clone()),
            };
            let text = format!("RT @someone: #{} {}", PRO_B[r.gen_range(0..4)], words[r.gen_range(0..words.len())]);
            posts.push(RawPost {
                id: format!("p{i}"),
                text,
                author,
                retweeters: Vec::new(),
                timestamp: Some(i as i64),
                retweet_of: target,
            });
            continue;
        }
        let mut tokens: Vec<String> = (0..r.gen_range(1..8))
            .map(|_| words[r.gen_range(0..words.len())].to_owned())
            .collect();
        let camp = r.gen_range(0..2);
        let own: &[&str] = if camp == 0 { &PRO_A } else { &PRO_B };
        let other: &[&str] = if camp == 0 { &PRO_B } else { &PRO_A };
        for _ in 0..r.gen_range(0..3) {
            let tag = own[r.gen_range(0..own.len())];
            let tag = if r.gen_bool(0.3) { tag.to_uppercase() } else { tag.to_owned() };
            tokens.push(format!("#{tag}{}", punct[r.gen_range(0..punct.len())]));
        }
        if r.gen_bool(0.1) {
            tokens.push(format!("#{}", other[r.gen_range(0..other.len())]));
        }
        for _ in 0..r.gen_range(0..3) {
            tokens.push(format!("#{}{}", NEUTRAL[r.gen_range(0..NEUTRAL.len())], punct[r.gen_range(0..punct.len())]));
        }
        tokens.shuffle(&mut r);
        let retweeters = (0..r.gen_range(0..4)).map(|_| format!("user{}", r.gen_range(0..80))).collect();
        posts.push(RawPost {
            id: format!("p{i}"),
            text: tokens.join(" "),
            author,
            retweeters,
            timestamp: Some(i as i64),
            retweet_of: None,
        });
    }
    posts
}
