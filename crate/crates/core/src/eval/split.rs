use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Minimum items per class for a stratified split.
pub const MIN_PER_CLASS: usize = 10;

/// Disjoint train/validation/test index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
    pub fractions: [f64; 3],
    pub stratified: bool,
    pub seed: u64,
}

/// Shuffles each class separately and cuts it by `fractions`.
///
/// Per class with `n` items, train gets `round(n * f_train)`, validation
/// `round(n * f_val)`, and test the remainder.
pub fn stratified_split(labels: &[u8], fractions: [f64; 3], seed: u64) -> Result<Split, EvalError> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(EvalError::Fractions(fractions));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        fractions,
        stratified: true,
        seed,
    };
    for class in [0u8, 1] {
        let mut members: Vec<u32> = (0..labels.len() as u32).filter(|&i| labels[i as usize] == class).collect();
        if members.len() < MIN_PER_CLASS {
            return Err(EvalError::TooFewItems {
                class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let n_train = (n * fractions[0]).round() as usize;
        let n_val = ((n * fractions[1]).round() as usize).min(members.len() - n_train);
        split.train.extend_from_slice(&members[..n_train]);
        split.val.extend_from_slice(&members[n_train..n_train + n_val]);
        split.test.extend_from_slice(&members[n_train + n_val..]);
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(EvalError::Label(bad));
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
