//! Synthetic polarized user-post graphs with ground-truth stance labels.
//!
//! Users split evenly into two camps. Each user authors a geometric number
//! of posts that inherit the author's camp as label. Each post draws a
//! capped power-law number of retweeters, each from the author's camp with
//! probability `1 - flip` and from the other camp otherwise. Features are
//! the camp mean (`±separation/2` along a random unit direction) plus
//! Gaussian noise; low-signal posts get pure noise.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::write_dataset_files;
use crate::graph::{BipartiteGraph, EdgeRecord, EdgeType};
use crate::nn::Matrix;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_users: usize,
    /// Mean of the geometric (support 1, 2, ...) posts-per-user law.
    pub mean_tweets_per_user: f64,
    /// Probability that a retweet crosses camps.
    pub flip: f64,
    /// Expected retweets per post.
    pub retweet_rate: f64,
    pub retweet_exponent: f64,
    pub retweet_cap: usize,
    pub feature_dim: usize,
    /// Distance between the two class mean vectors.
    pub separation: f64,
    pub noise_sigma: f64,
    /// Fraction of posts whose features are pure noise.
    pub low_signal_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_users: 2500,
            mean_tweets_per_user: 4.0,
            flip: 0.05,
            retweet_rate: 3.0,
            retweet_exponent: 2.2,
            retweet_cap: 200,
            feature_dim: 32,
            separation: 1.0,
            noise_sigma: 1.0,
            low_signal_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_owned()));
        if self.num_users < 2 {
            return bad("need at least two users (one per camp)");
        }
        if !(self.mean_tweets_per_user >= 1.0 && self.mean_tweets_per_user.is_finite()) {
            return bad("mean_tweets_per_user must be >= 1");
        }
        if !(0.0..0.5).contains(&self.flip) {
            return bad("flip must lie in [0, 0.5)");
        }
        if self.retweet_cap == 0 && self.retweet_rate > 0.0 {
            return bad("retweet_cap must be positive when retweet_rate > 0");
        }
        if !(self.retweet_rate >= 0.0 && self.retweet_rate < self.retweet_cap.max(1) as f64 / 2.0) {
            return bad("retweet_rate must lie in [0, retweet_cap / 2)");
        }
        if !(self.retweet_exponent > 0.0) {
            return bad("retweet_exponent must be positive");
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        if !(self.separation >= 0.0 && self.noise_sigma >= 0.0) {
            return bad("separation and noise_sigma must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.low_signal_fraction) {
            return bad("low_signal_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Generated posts in id order (`t0, t1, ...`), which is also the order
/// their first edge appears, so a graph built from `edges` indexes them alike.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub features: Matrix,
    pub edges: Vec<EdgeRecord>,
    pub low_signal: Vec<bool>,
    /// Camp of each user `u{i}`.
    pub user_camps: Vec<u8>,
}

impl SynthCorpus {
    pub fn write_files(&self, dir: &Path) -> std::io::Result<()> {
        write_dataset_files(dir, &self.ids, &self.labels, &self.features, &self.edges, Some(&self.low_signal))
    }
}

/// `P(k) ∝ (k + s)^-alpha` on `0..=cap`, with `s` chosen so the mean is `rate`.
#[derive(Debug, Clone)]
pub struct CappedPowerLaw {
    cdf: Vec<f64>,
}

impl CappedPowerLaw {
    pub fn new(rate: f64, alpha: f64, cap: usize) -> CappedPowerLaw {
        if rate <= 0.0 || cap == 0 {
            return CappedPowerLaw { cdf: vec![1.0] };
        }
        let weights = |s: f64| -> Vec<f64> { (0..=cap).map(|k| (k as f64 + s).powf(-alpha)).collect() };
        let mean = |s: f64| {
            let w = weights(s);
            let z: f64 = w.iter().sum();
            w.iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>() / z
        };
        // the mean rises monotonically from 0 (s -> 0) towards cap / 2 (s -> inf)
        let (mut lo, mut hi) = (1e-12f64.ln(), 1e12f64.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean(mid.exp()) < rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = weights((0.5 * (lo + hi)).exp());
        let z: f64 = w.iter().sum();
        let mut acc = 0.0;
        let cdf = w
            .iter()
            .map(|p| {
                acc += p / z;
                acc
            })
            .collect();
        CappedPowerLaw { cdf }
    }

    pub fn pmf(&self, k: usize) -> f64 {
        match k {
            0 => self.cdf[0],
            _ if k < self.cdf.len() => self.cdf[k] - self.cdf[k - 1],
            _ => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        (0..self.cdf.len()).map(|k| k as f64 * self.pmf(k)).sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let user_camps: Vec<u8> = (0..cfg.num_users).map(|i| (i % 2) as u8).collect();
    let camp_members: [Vec<usize>; 2] = [0u8, 1].map(|c| (0..cfg.num_users).filter(|&u| user_camps[u] == c).collect());

    // Geometric in rand_distr counts failures, so shift by one for support 1, 2, ...
    let per_user = Geometric::new(1.0 / cfg.mean_tweets_per_user).expect("validated probability");
    let retweets = CappedPowerLaw::new(cfg.retweet_rate, cfg.retweet_exponent, cfg.retweet_cap);

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    for author in 0..cfg.num_users {
        let count = per_user.sample(&mut rng) + 1;
        for _ in 0..count {
            let t = ids.len();
            let id = format!("t{t}");
            let camp = user_camps[author];
            edges.push(EdgeRecord::new(id.clone(), format!("u{author}"), EdgeType::Post));
            let want = retweets.sample(&mut rng);
            let mut chosen = HashSet::new();
            let mut attempts = 0;
            while chosen.len() < want && attempts < 20 * want {
                attempts += 1;
                let side = if rng.gen::<f64>() < cfg.flip { 1 - camp } else { camp };
                let u = *camp_members[side as usize].choose(&mut rng).expect("both camps populated");
                if u != author && chosen.insert(u) {
                    edges.push(EdgeRecord::new(id.clone(), format!("u{u}"), EdgeType::Retweet));
                }
            }
            ids.push(id);
            labels.push(camp);
        }
    }

    let n = ids.len();
    let dim = cfg.feature_dim;
    let mut direction: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    direction.iter_mut().for_each(|x| *x /= norm);

    let mut low_signal = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let num_low = (cfg.low_signal_fraction * n as f64).round() as usize;
    for &t in &order[..num_low] {
        low_signal[t] = true;
    }

    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
    let mut features = Matrix::zeros(n, dim);
    for t in 0..n {
        let sign = if labels[t] == 1 { 0.5 } else { -0.5 };
        let row = features.row_mut(t);
        for (x, d) in row.iter_mut().zip(&direction) {
            let mean = if low_signal[t] { 0.0 } else { sign * cfg.separation * d };
            *x = mean + noise.sample(&mut rng);
        }
    }

    Ok(SynthCorpus {
        ids,
        labels,
        features,
        edges,
        low_signal,
        user_camps,
    })
}

/// Per-tweet neighbor counts and their histograms (index = count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub first_order: Vec<usize>,
    pub second_order: Vec<usize>,
    pub first_order_hist: Vec<usize>,
    pub second_order_hist: Vec<usize>,
}

fn histogram(counts: &[usize]) -> Vec<usize> {
    let mut h = vec![0; counts.iter().max().map_or(0, |&m| m + 1)];
    for &c in counts {
        h[c] += 1;
    }
    h
}

/// Distinct adjacent users and distinct two-step tweets (excluding self) per tweet.
pub fn degree_report(graph: &BipartiteGraph) -> DegreeReport {
    let n = graph.num_tweets() as u32;
    let first_order: Vec<usize> = (0..n).map(|t| graph.first_order_users(t).len()).collect();
    let second_order: Vec<usize> = (0..n).map(|t| graph.second_order_tweets(t).len()).collect();
    DegreeReport {
        first_order_hist: histogram(&first_order),
        second_order_hist: histogram(&second_order),
        first_order,
        second_order,
    }
}
