//! Outage probability, achievable-rate ratio, inspection error rates, and
//! the studies built from them.

mod studies;
mod table;

pub use studies::{
    achieved_rates, inspection_study, outage_study, predict_links, robustness_sweep, run_baselines, Dropout, Scheme,
};
pub use table::{read_table_csv, read_table_json, write_table, MetricRow, MetricTable, SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("empty test set")]
    EmptyTestSet,
    #[error("dropout of {requested} {what} exceeds the {available} available")]
    Dropout {
        what: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("prediction and rate lists differ in length ({0} vs {1})")]
    Misaligned(usize, usize),
    #[error(transparent)]
    Nnet(#[from] crate::nnet::NnetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// χ(R_n, R_T): 1 when the achieved rate meets the threshold.
pub fn indicator(rate: f64, threshold: f64) -> u8 {
    u8::from(rate >= threshold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageCurve {
    pub scheme: String,
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// `P(R_T) = 1 − Σ_n χ(R_n, R_T) / N_t` at every threshold.
pub fn outage_curve(rates: &[f64], thresholds: &[f64], scheme: &str) -> Result<OutageCurve, EvalError> {
    if rates.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let n = rates.len() as f64;
    let probabilities = thresholds
        .iter()
        .map(|&t| 1.0 - rates.iter().map(|&r| indicator(r, t) as f64).sum::<f64>() / n)
        .collect();
    Ok(OutageCurve {
        scheme: scheme.to_string(),
        thresholds: thresholds.to_vec(),
        probabilities,
    })
}

/// Σ rate at the predicted link over Σ best rate. A test set whose best
/// rates are all zero scores 1.
pub fn rate_ratio(predictions: &[usize], rate_sets: &[&[f64]]) -> Result<f64, EvalError> {
    if predictions.len() != rate_sets.len() {
        return Err(EvalError::Misaligned(predictions.len(), rate_sets.len()));
    }
    let mut got = 0.0;
    let mut best = 0.0;
    for (&p, rates) in predictions.iter().zip(rate_sets) {
        got += rates[p];
        best += rates.iter().copied().fold(0.0, f64::max);
    }
    Ok(if best > 0.0 { got / best } else { 1.0 })
}

/// Count rounded half away from zero and floored at zero.
pub fn round_count(x: f64) -> f64 {
    x.round().max(0.0)
}

/// `(mistaken, missed)`: surplus and deficit of the rounded prediction
/// against the true per-lane counts, each over `max(1, Σ d)`.
pub fn inspection_rates(predicted: &[f64], truth: &[f64]) -> (f64, f64) {
    let denom = truth.iter().sum::<f64>().max(1.0);
    let mut mistaken = 0.0;
    let mut missed = 0.0;
    for (&p, &d) in predicted.iter().zip(truth) {
        let p = round_count(p);
        mistaken += (p - d).max(0.0);
        missed += (d - p).max(0.0);
    }
    (mistaken / denom, missed / denom)
}

/// Per-sample inspection error rates of one test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InspectionReport {
    pub mistaken: Vec<f64>,
    pub missed: Vec<f64>,
    /// Mean over samples and lanes of |round(d̂) − d|.
    pub mean_abs_error: f64,
    /// Mean over samples and lanes of |d̂ − d| before rounding.
    pub mean_abs_error_raw: f64,
}

impl InspectionReport {
    pub fn new(predictions: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<Self, EvalError> {
        if predictions.is_empty() {
            return Err(EvalError::EmptyTestSet);
        }
        if predictions.len() != truths.len() {
            return Err(EvalError::Misaligned(predictions.len(), truths.len()));
        }
        let (mut mistaken, mut missed) = (Vec::new(), Vec::new());
        let (mut abs, mut raw, mut n) = (0.0, 0.0, 0usize);
        for (p, d) in predictions.iter().zip(truths) {
            let (a, b) = inspection_rates(p, d);
            mistaken.push(a);
            missed.push(b);
            for (&pi, &di) in p.iter().zip(d) {
                abs += (round_count(pi) - di).abs();
                raw += (pi - di).abs();
                n += 1;
            }
        }
        Ok(Self {
            mistaken,
            missed,
            mean_abs_error: abs / n as f64,
            mean_abs_error_raw: raw / n as f64,
        })
    }

    pub fn mean_mistaken(&self) -> f64 {
        self.mistaken.iter().sum::<f64>() / self.mistaken.len() as f64
    }

    pub fn mean_missed(&self) -> f64 {
        self.missed.iter().sum::<f64>() / self.missed.len() as f64
    }

    /// Fraction of samples whose rate is at most `x`, for each `x`.
    pub fn cdf(values: &[f64], at: &[f64]) -> Vec<f64> {
        at.iter()
            .map(|&x| values.iter().filter(|&&v| v <= x).count() as f64 / values.len().max(1) as f64)
            .collect()
    }
}
