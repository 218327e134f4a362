//! Two-stage training: handoff prediction end to end with cross-entropy,
//! then the traffic inspection head on frozen image features with MSE.

mod forward;
mod stage;

pub use forward::{argmax, predict_record, record_logits, AgentMask, Variant};
pub use stage::{
    accuracy, batch_gradients, train_stage1, train_stage2, uav_features, write_log, LogRow, Stage1Outcome,
    Stage2Outcome,
};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nnet::{AdamWConfig, NnetError, CE_CLAMP};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error("non-finite loss at step {step}")]
    NonFinite { step: u64 },
    #[error("empty split: {0}")]
    EmptySplit(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("stage 2 needs a stage-1 checkpoint")]
    MissingStage1,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub grad_accum_steps: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 40,
            learning_rate: 2e-4,
            grad_accum_steps: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage2Config {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            epochs: 200,
            learning_rate: 2e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub optimizer: AdamWConfig,
    /// Train, validation and test fractions of the snapshot records.
    pub split: [f64; 3],
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
            optimizer: AdamWConfig::default(),
            split: [0.72, 0.18, 0.10],
            rng_seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.split.iter().any(|f| !(0.0..=1.0).contains(f)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("split fractions must lie in [0, 1] and sum to 1");
        }
        if self.stage1.batch_size == 0 || self.stage2.batch_size == 0 || self.stage1.grad_accum_steps == 0 {
            return bad("batch sizes and grad_accum_steps must be at least 1");
        }
        if !(self.stage1.learning_rate >= 0.0 && self.stage2.learning_rate >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        Ok(())
    }
}

/// Record indices of the train, validation and test splits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n`, cut at the rounded fractions. Each index ends
/// up in exactly one split.
pub fn split_dataset(n: usize, fractions: [f64; 3], seed: u64) -> Result<Split, TrainError> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(TrainError::InvalidConfig("split fractions must lie in [0, 1] and sum to 1".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(&[seed, rng::TAG_SPLIT]));
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    let split = Split { train: idx, val, test };
    for (name, part, f) in [("train", &split.train, fractions[0]), ("validation", &split.val, fractions[1]), ("test", &split.test, fractions[2])] {
        if f > 0.0 && part.is_empty() {
            return Err(TrainError::EmptySplit(format!("{name} split of {n} records")));
        }
    }
    Ok(split)
}

/// `−ln max(p[label], 1e−12)`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(CE_CLAMP).ln()
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64, TrainError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(TrainError::InvalidConfig(format!("mse over {} and {} values", pred.len(), target.len())));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    pub(crate) use super::stage::tests::{random_records, small_model};
    use proptest::prelude::*;

    #[test]
    fn default_split_sizes() {
        let s = split_dataset(100, [0.72, 0.18, 0.10], 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (72, 18, 10));
    }

    #[test]
    fn all_train_split() {
        let s = split_dataset(13, [1.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(s.train.len(), 13);
        assert!(s.val.is_empty() && s.test.is_empty());
    }

    #[test]
    fn empty_split_is_an_error() {
        assert!(matches!(split_dataset(2, [0.72, 0.18, 0.10], 1), Err(TrainError::EmptySplit(_))));
        assert!(split_dataset(10, [0.5, 0.6, 0.0], 1).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 10usize..400, seed in any::<u64>()) {
            let s = split_dataset(n, [0.72, 0.18, 0.10], seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(split_dataset(n, [0.72, 0.18, 0.10], seed).unwrap(), s);
        }
    }

    #[test]
    fn cross_entropy_values() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1), 0.0);
        let uniform = vec![1.0 / 20.0; 20];
        assert!((cross_entropy(&uniform, 7) - 20f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[0.5, 0.5], 0) - 2f64.ln()).abs() < 1e-12);
        let clamped = cross_entropy(&[1.0, 0.0], 1);
        assert!(clamped.is_finite() && (clamped - 1e12f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
        let p = [0.3, -1.2, 4.0, 2.5];
        let t = [1.0, 0.0, 3.0, 2.0];
        let mut acc = 0.0;
        for i in 0..4 {
            acc += (p[i] - t[i]) * (p[i] - t[i]);
        }
        assert!((mse_loss(&p, &t).unwrap() - acc / 4.0).abs() < 1e-15);
    }
}
