//! Metrics restricted to item subsets: low-signal flag or neighbor-count ranges.

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricsReport};
use super::EvalError;
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucketing {
    FeatureSignal,
    FirstOrderDegree,
    SecondOrderDegree,
}

impl Bucketing {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "feature_signal" | "signal" => Some(Self::FeatureSignal),
            "first_order_degree" | "degree1" => Some(Self::FirstOrderDegree),
            "second_order_degree" | "degree2" => Some(Self::SecondOrderDegree),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub bucketing: Bucketing,
    pub label: String,
    pub size: usize,
    /// Absent for empty buckets.
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// `"0-5"`, `"6-20"`, `"21+"` for upper bounds `[5, 20]`.
pub fn degree_bucket_label(degree: usize, upper_bounds: &[usize]) -> String {
    let mut lo = 0;
    for &hi in upper_bounds {
        if degree <= hi {
            return format!("{lo}-{hi}");
        }
        lo = hi + 1;
    }
    format!("{lo}+")
}

fn all_degree_labels(upper_bounds: &[usize]) -> Vec<String> {
    let mut lo = 0;
    let mut out = Vec::new();
    for &hi in upper_bounds {
        out.push(format!("{lo}-{hi}"));
        lo = hi + 1;
    }
    out.push(format!("{lo}+"));
    out
}

/// Bucket label for each item of `ids`, plus the full ordered label list.
pub fn bucket_keys(
    data: &Dataset,
    ids: &[u32],
    bucketing: Bucketing,
    upper_bounds: &[usize],
) -> Result<(Vec<String>, Vec<String>), EvalError> {
    match bucketing {
        Bucketing::FeatureSignal => {
            let flags = data
                .low_signal
                .as_ref()
                .ok_or(EvalError::MissingAttribute("low-signal flags (low_signal.tsv)"))?;
            let keys = ids
                .iter()
                .map(|&t| if flags[t as usize] { "low_signal" } else { "normal" }.to_owned())
                .collect();
            Ok((keys, vec!["low_signal".into(), "normal".into()]))
        }
        Bucketing::FirstOrderDegree | Bucketing::SecondOrderDegree => {
            let keys = ids
                .iter()
                .map(|&t| {
                    let deg = if bucketing == Bucketing::FirstOrderDegree {
                        data.graph.first_order_users(t).len()
                    } else {
                        data.graph.second_order_tweets(t).len()
                    };
                    degree_bucket_label(deg, upper_bounds)
                })
                .collect();
            Ok((keys, all_degree_labels(upper_bounds)))
        }
    }
}

/// Metrics per bucket, in `labels` order.
pub fn bucket_metrics(
    bucketing: Bucketing,
    scores: &[f64],
    truth: &[u8],
    keys: &[String],
    labels: &[String],
    threshold: f64,
) -> Result<Vec<BucketReport>, EvalError> {
    if scores.len() != truth.len() || keys.len() != truth.len() {
        return Err(EvalError::Length(scores.len(), keys.len()));
    }
    labels
        .iter()
        .map(|label| {
            let (s, t): (Vec<f64>, Vec<u8>) = keys
                .iter()
                .zip(scores.iter().zip(truth))
                .filter(|(k, _)| *k == label)
                .map(|(_, (&s, &t))| (s, t))
                .unzip();
            let metrics = if s.is_empty() { None } else { Some(evaluate(&s, &t, threshold)?) };
            let note = (bucketing == Bucketing::SecondOrderDegree && bucket_upper(label).is_some_and(|hi| hi <= 5))
                .then(|| "few second-order neighbors: known weak spot of skip aggregation".to_owned());
            Ok(BucketReport {
                bucketing,
                label: label.clone(),
                size: s.len(),
                metrics,
                note,
            })
        })
        .collect()
}

fn bucket_upper(label: &str) -> Option<usize> {
    label.split_once('-').and_then(|(_, hi)| hi.parse().ok())
}
