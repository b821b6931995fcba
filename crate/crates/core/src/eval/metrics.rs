//! Accuracy, F1 on the positive class, and rank-based AUC.

use serde::{Deserialize, Serialize};

use super::EvalError;

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::Length(a, b));
    }
    if a == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn accuracy(pred: &[u8], truth: &[u8]) -> Result<f64, EvalError> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<Confusion, EvalError> {
    check_lengths(pred.len(), truth.len())?;
    let mut c = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// F1 of class 1. With no predicted and no actual positives the score is 1.
pub fn f1(pred: &[u8], truth: &[u8]) -> Result<f64, EvalError> {
    let c = confusion(pred, truth)?;
    if c.tp + c.fp + c.fn_ == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64)
}

/// Area under the ROC curve via the Mann-Whitney U statistic with midranks.
///
/// Returns `None` when only one class is present.
pub fn auc(scores: &[f64], truth: &[u8]) -> Result<Option<f64>, EvalError> {
    check_lengths(scores.len(), truth.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::NaNScore);
    }
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // ranks are 1-based; tied runs share the average of their ranks
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let pos_in_run = order[i..j].iter().filter(|&&k| truth[k] == 1).count();
        rank_sum_pos += midrank * pos_in_run as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(Some(u / (n_pos as f64 * n_neg as f64)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Scores are probabilities (or any monotone transform when `threshold` is
/// adjusted to match); predictions are `score >= threshold`.
pub fn evaluate(scores: &[f64], truth: &[u8], threshold: f64) -> Result<MetricsReport, EvalError> {
    let pred: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
    Ok(MetricsReport {
        n: truth.len(),
        accuracy: accuracy(&pred, truth)?,
        f1: f1(&pred, truth)?,
        auc: auc(scores, truth)?,
    })
}
