//! Scoring, timing, and channel-physics helpers.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radio propagation speed used for Doppler spread, m/s.
pub const PROPAGATION_SPEED: f64 = 2.998e8;

/// Coefficient of determination: `1 − SS_res / SS_tot` with the total
/// sum of squares taken about the truth mean. Negative when the
/// predictor does worse than predicting the mean.
pub fn r2_score(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean absolute error.
pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    let n = truth.len() as f64;
    Ok(predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n)
}

fn check_pair(predicted: &[f64], truth: &[f64]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::TooFewRows {
            needed: 1,
            actual: 0,
        });
    }
    Ok(())
}

/// Relative R² improvement of the filter over its baseline, percent:
/// `100 · (r2_filter − r2_baseline) / r2_baseline`. The baseline must
/// be positive for the ratio to mean anything.
pub fn r2_gain(r2_filter: f64, r2_baseline: f64) -> Result<f64> {
    if r2_baseline <= 0.0 {
        return Err(Error::NonPositiveInput {
            what: format!("baseline R² ({r2_baseline})"),
        });
    }
    Ok(100.0 * (r2_filter - r2_baseline) / r2_baseline)
}

/// Median wall-clock duration of `f` over `reps` runs (at least 3, so
/// the median is insulated from a cold first call).
pub fn median_runtime<F: FnMut()>(reps: usize, mut f: F) -> Result<Duration> {
    if reps < 3 {
        return Err(Error::InvalidConfig {
            reason: format!("timing needs at least 3 repetitions, got {reps}"),
        });
    }
    let mut times: Vec<Duration> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed()
        })
        .collect();
    times.sort();
    Ok(times[times.len() / 2])
}

/// Channel coherence time for a device moving at `speed` m/s under a
/// carrier at `carrier_hz`: `sqrt(9 / (16π f_m²))` with the maximum
/// Doppler shift `f_m = (speed / c) · carrier`.
pub fn coherence_time(speed: f64, carrier_hz: f64) -> Result<f64> {
    if speed <= 0.0 {
        return Err(Error::NonPositiveInput {
            what: format!("speed ({speed})"),
        });
    }
    if carrier_hz <= 0.0 {
        return Err(Error::NonPositiveInput {
            what: format!("carrier frequency ({carrier_hz})"),
        });
    }
    let doppler = speed / PROPAGATION_SPEED * carrier_hz;
    Ok((9.0 / (16.0 * std::f64::consts::PI * doppler * doppler)).sqrt())
}

/// One evaluation result: a predictor scored on one dataset at one
/// window/lead combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub algorithm: String,
    /// Prediction horizon, samples.
    pub lead: usize,
    /// Moving-average window the truth series was filtered with.
    pub window: usize,
    pub r2: f64,
    pub mae: f64,
    /// Scored samples (past warm-up).
    pub n_samples: usize,
    /// Seconds spent fitting (zero for history-only predictors).
    pub fit_seconds: f64,
    /// Mean seconds per prediction step.
    pub predict_seconds: f64,
}

/// Write evaluation rows as CSV:
/// `dataset,algorithm,L,F,r2,mae,n_samples`.
pub fn write_eval_csv<W: std::io::Write>(rows: &[EvalReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dataset", "algorithm", "L", "F", "r2", "mae", "n_samples"])?;
    for row in rows {
        w.write_record([
            row.dataset.clone(),
            row.algorithm.clone(),
            row.lead.to_string(),
            row.window.to_string(),
            format!("{}", row.r2),
            format!("{}", row.mae),
            row.n_samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
