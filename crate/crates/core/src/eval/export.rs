use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::model::Prediction;
use crate::nn::sigmoid;

#[derive(Debug, Clone, PartialEq)]
pub struct MisclassifiedRow {
    pub id: String,
    pub logit: f64,
    pub label: u8,
}

/// Items whose thresholded prediction disagrees with the label, with raw logits.
pub fn export_misclassified_logits(
    pred: &Prediction,
    tweet_ids: &[String],
    labels: &[u8],
    threshold: f64,
) -> Vec<MisclassifiedRow> {
    pred.ids
        .iter()
        .zip(&pred.logits)
        .filter_map(|(&t, &logit)| {
            let label = labels[t as usize];
            let predicted = u8::from(sigmoid(logit) >= threshold);
            (predicted != label).then(|| MisclassifiedRow {
                id: tweet_ids[t as usize].clone(),
                logit,
                label,
            })
        })
        .collect()
}

pub fn write_misclassified_tsv<W: Write>(mut w: W, rows: &[MisclassifiedRow]) -> std::io::Result<()> {
    for r in rows {
        writeln!(w, "{}\t{}\t{}", r.id, r.logit, r.label)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub id: String,
    pub label: u8,
    pub values: Vec<f64>,
}

/// A per-class random sample of `round(fraction * n_class)` embeddings.
pub fn export_embeddings(
    pred: &Prediction,
    tweet_ids: &[String],
    labels: &[u8],
    fraction: f64,
    seed: u64,
) -> Result<Vec<EmbeddingRow>, EvalError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EvalError::SampleFraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..pred.ids.len())
            .filter(|&i| labels[pred.ids[i] as usize] == class)
            .collect();
        members.shuffle(&mut rng);
        let take = (members.len() as f64 * fraction).round() as usize;
        picked.extend_from_slice(&members[..take]);
    }
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|i| {
            let t = pred.ids[i] as usize;
            EmbeddingRow {
                id: tweet_ids[t].clone(),
                label: labels[t],
                values: pred.embeddings.row(i).to_vec(),
            }
        })
        .collect())
}

pub fn write_embedding_tsv<W: Write>(mut w: W, rows: &[EmbeddingRow]) -> std::io::Result<()> {
    for r in rows {
        write!(w, "{}\t{}", r.id, r.label)?;
        for v in &r.values {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
