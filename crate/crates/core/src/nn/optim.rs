//! AdamW with a linear warm-up / linear decay learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub total_steps: u64,
    pub warmup_fraction: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            total_steps: 1,
            warmup_fraction: 0.06,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(NnError::Config(format!("warmup_fraction {} not in (0, 1)", self.warmup_fraction)));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(NnError::Config(format!("learning_rate {}", self.learning_rate)));
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> u64 {
        ((self.warmup_fraction * self.total_steps as f64).round() as u64).max(1)
    }

    /// Multiplier on the base rate: 0 -> 1 across warm-up, then 1 -> 0 at `total_steps`.
    pub fn schedule(&self, step: u64) -> f64 {
        let warm = self.warmup_steps();
        if step > self.total_steps {
            return 0.0;
        }
        if step < warm {
            return step as f64 / warm as f64;
        }
        let decay = self.total_steps.saturating_sub(warm);
        if decay == 0 {
            return if step < self.total_steps { 1.0 } else { 0.0 };
        }
        (self.total_steps - step) as f64 / decay as f64
    }
}

/// Applies one AdamW update to every parameter and returns the rate used.
///
/// Weight decay is decoupled from the adaptive step; gradients are left in
/// place for the caller to zero.
pub fn adamw_step(store: &mut ParamStore, cfg: &OptimConfig, global_step: u64) -> f64 {
    if global_step > cfg.total_steps {
        log::warn!("step {global_step} beyond schedule end {}; learning rate is 0", cfg.total_steps);
    }
    let lr = cfg.learning_rate * cfg.schedule(global_step);
    for p in store.iter_mut() {
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let decay = 1.0 - lr * cfg.weight_decay;
        let value = p.value.data_mut();
        let m = p.adam_m.data_mut();
        let v = p.adam_v.data_mut();
        for (((x, &g), mi), vi) in value.iter_mut().zip(p.grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *x *= decay;
            *x -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    lr
}
