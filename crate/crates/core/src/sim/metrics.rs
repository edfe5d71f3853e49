//! Response rates, poor-match histograms and multi-run aggregates.

use crate::error::{EcoError, Result};

/// Steps scoring below this are poor matches.
pub const POOR_MATCH_PERCENT: f64 = 50.0;
pub const BUCKET: usize = 100;
pub const FINAL_WINDOW: usize = 100;

/// Mean match percent over `series[start..end]`.
pub fn response_rate(series: &[f64], start: usize, end: usize) -> Result<f64> {
    if start >= end || end > series.len() {
        return Err(EcoError::BadWindow { start, end, len: series.len() });
    }
    Ok(series[start..end].iter().sum::<f64>() / (end - start) as f64)
}

/// Mean over the last `FINAL_WINDOW` steps (or all of a shorter series).
pub fn final_rate(series: &[f64]) -> Result<f64> {
    response_rate(series, series.len().saturating_sub(FINAL_WINDOW), series.len())
}

/// Poor matches per 100-step bucket as `(first step, count)`, steps counted
/// from 1. A trailing partial bucket is included.
pub fn poor_match_histogram(series: &[f64]) -> Vec<(usize, usize)> {
    series
        .chunks(BUCKET)
        .enumerate()
        .map(|(i, c)| (i * BUCKET + 1, c.iter().filter(|&&m| m < POOR_MATCH_PERCENT).count()))
        .collect()
}

/// Sample mean and standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub mean_final_rate: f64,
    pub std_dev: f64,
    pub runs: usize,
    /// Per-step mean over runs.
    pub mean_curve: Vec<f64>,
}

pub fn aggregate_runs(runs: &[Vec<f64>]) -> Result<Aggregate> {
    let Some(first) = runs.first() else {
        return Err(EcoError::BadWindow { start: 0, end: 0, len: 0 });
    };
    let len = first.len();
    if let Some(r) = runs.iter().find(|r| r.len() != len) {
        return Err(EcoError::BadWindow { start: 0, end: len, len: r.len() });
    }
    let finals = runs.iter().map(|r| final_rate(r)).collect::<Result<Vec<f64>>>()?;
    let (mean, sd) = mean_std(&finals);
    let mean_curve = (0..len).map(|i| runs.iter().map(|r| r[i]).sum::<f64>() / runs.len() as f64).collect();
    Ok(Aggregate { mean_final_rate: mean, std_dev: sd, runs: runs.len(), mean_curve })
}

/// Trailing moving average; entry `i` averages `series[i+1-w..=i]` and is
/// `None` until a full window exists.
pub fn moving_average(series: &[f64], w: usize) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= w {
            sum -= series[i - w];
        }
        out.push((w > 0 && i + 1 >= w).then(|| sum / w as f64));
    }
    out
}

/// First 1-based step at which the `w`-step moving average reaches `level`.
pub fn steps_to_level(series: &[f64], w: usize, level: f64) -> Option<usize> {
    moving_average(series, w).iter().position(|m| m.map_or(false, |m| m >= level)).map(|i| i + 1)
}
