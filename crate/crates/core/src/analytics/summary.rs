//! Per-batch summaries and smoothed learning curves.

use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_std};
use crate::error::{contract, Result};
use crate::orchestrator::RunRecord;
use crate::ppo::{rolling_mean, smoothing_window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedValue {
    pub seed: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample std; 0 when n = 1.
    pub std: f64,
    pub values: Vec<SeedValue>,
    /// Seeds whose run did not finish.
    pub missing: Vec<u64>,
    /// One smoothed curve per finished seed, in `values` order.
    #[serde(skip)]
    pub curves: Vec<Vec<f64>>,
}

impl BatchSummary {
    pub fn single(&self) -> bool {
        self.n == 1
    }
}

/// Success indicator on binary-success tasks, raw return otherwise,
/// smoothed over the environment's window.
pub fn learning_curve(rec: &RunRecord) -> Option<Vec<f64>> {
    let log = rec.final_log.as_ref()?;
    let xs: Vec<f64> = if rec.env.spec().has_binary_success {
        log.episodes.iter().map(|e| f64::from(u8::from(e.success))).collect()
    } else {
        log.raw_returns()
    };
    Some(rolling_mean(&xs, smoothing_window(rec.env)))
}

pub fn summarize_batch(records: &[RunRecord]) -> Result<BatchSummary> {
    if records.is_empty() {
        return Err(contract("summarize_batch needs at least one record"));
    }
    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut curves = Vec::new();
    for r in records {
        match r.final_value() {
            Some(v) => {
                values.push(SeedValue { seed: r.seed, value: v });
                if let Some(c) = learning_curve(r) {
                    curves.push(c);
                }
            }
            None => missing.push(r.seed),
        }
    }
    let xs: Vec<f64> = values.iter().map(|v| v.value).collect();
    Ok(BatchSummary {
        n: xs.len(),
        mean: if xs.is_empty() { f64::NAN } else { mean(&xs) },
        std: sample_std(&xs),
        values,
        missing,
        curves,
    })
}

/// Pointwise mean and sample std over curves, truncated to the shortest.
pub fn curve_band(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let mut mu = Vec::with_capacity(len);
    let mut sd = Vec::with_capacity(len);
    for i in 0..len {
        let col: Vec<f64> = curves.iter().map(|c| c[i]).collect();
        mu.push(mean(&col));
        sd.push(sample_std(&col));
    }
    (mu, sd)
}
