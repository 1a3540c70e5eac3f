//! Denoising and correlation analysis.
//!
//! Measured throughput is modeled as a smooth "true" series plus
//! sampling noise. A centered moving-average filter recovers the true
//! series; the residual defines the noise model whose variance feeds
//! the correction step of the prediction filter. Lagged correlations
//! quantify how informative present features are about future
//! throughput.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Feature, ThroughputTrace};

/// A measured series decomposed into true throughput plus noise.
///
/// Invariant: `measured[n] == true_throughput[n] + noise[n]` exactly,
/// by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredTrace {
    pub measured: Vec<f64>,
    pub true_throughput: Vec<f64>,
    pub noise: Vec<f64>,
    /// Odd window length the filter ran with.
    pub filter_window: usize,
}

impl FilteredTrace {
    pub fn len(&self) -> usize {
        self.measured.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measured.is_empty()
    }
}

/// Noise statistics of a filtered trace (population moments).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Population variance of the noise series; the measurement-noise
    /// variance used by the correction step.
    pub sigma2_m: f64,
    /// Mean of the noise series (near zero for a centered filter).
    pub mean: f64,
}

/// Centered moving average with edge shrinkage.
///
/// Sample `n` averages the window `[n-h, n+h]` (`h = window / 2`)
/// clipped to the series, so edges average fewer points rather than
/// padding. The window must be odd to stay centered.
pub fn moving_average_filter(measured: &[f64], window: usize) -> Result<FilteredTrace> {
    if measured.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::EvenWindow { window });
    }
    if window > measured.len() {
        return Err(Error::WindowTooLarge {
            window,
            len: measured.len(),
        });
    }
    let half = window / 2;
    let n = measured.len();
    let mut true_throughput = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let span = &measured[lo..=hi];
        let mean = span.iter().sum::<f64>() / span.len() as f64;
        true_throughput.push(mean);
    }
    let noise = measured
        .iter()
        .zip(&true_throughput)
        .map(|(m, t)| m - t)
        .collect();
    Ok(FilteredTrace {
        measured: measured.to_vec(),
        true_throughput,
        noise,
        filter_window: window,
    })
}

/// Population mean and variance of the noise series.
pub fn estimate_noise(filtered: &FilteredTrace) -> NoiseModel {
    let n = filtered.noise.len() as f64;
    let mean = filtered.noise.iter().sum::<f64>() / n;
    let sigma2_m = filtered
        .noise
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / n;
    NoiseModel { sigma2_m, mean }
}

/// Pearson correlation coefficient between two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            actual: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Correlation between the measured series and its filtered version —
/// how much structure the filter preserves.
pub fn measured_vs_filtered(filtered: &FilteredTrace) -> Result<f64> {
    pearson(&filtered.measured, &filtered.true_throughput)
}

/// Correlation between a present feature and the true throughput `lead`
/// samples ahead: pairs `(feature[n], true[n+lead])` for every valid `n`.
///
/// `Feature::Throughput` correlates the filtered series with its own
/// future. Optional features must be present on every sample.
pub fn lagged_correlation(
    trace: &ThroughputTrace,
    filtered: &FilteredTrace,
    feature: Feature,
    lead: usize,
) -> Result<f64> {
    if lead == 0 {
        return Err(Error::InvalidLead { lead });
    }
    if trace.len() != filtered.len() {
        return Err(Error::LengthMismatch {
            left: trace.len(),
            right: filtered.len(),
        });
    }
    let n = filtered.len();
    if n <= lead + 1 {
        return Err(Error::TraceTooShort {
            needed: lead + 2,
            actual: n,
        });
    }
    let present: Vec<f64> = match feature {
        Feature::Throughput => filtered.true_throughput[..n - lead].to_vec(),
        other => {
            let column = trace.feature_column(other).ok_or_else(|| Error::MissingColumn {
                column: other.to_string(),
            })?;
            column[..n - lead].to_vec()
        }
    };
    let future = &filtered.true_throughput[lead..];
    pearson(&present, future)
}

/// One row of a correlation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrRow {
    pub feature: Feature,
    pub lead: usize,
    pub rho: f64,
}

/// Lagged correlations for every available feature (plus throughput
/// itself) across a set of leads.
pub fn correlation_report(
    trace: &ThroughputTrace,
    filtered: &FilteredTrace,
    leads: &[usize],
) -> Result<Vec<CorrRow>> {
    let mut features: Vec<Feature> = Feature::COLUMNS
        .into_iter()
        .filter(|f| trace.feature_column(*f).is_some())
        .collect();
    features.push(Feature::Throughput);
    let mut rows = Vec::new();
    for feature in features {
        for &lead in leads {
            let rho = lagged_correlation(trace, filtered, feature, lead)?;
            rows.push(CorrRow { feature, lead, rho });
        }
    }
    Ok(rows)
}

/// Write a correlation report as CSV with columns `feature,L,rho`.
pub fn write_correlation_csv<W: std::io::Write>(rows: &[CorrRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "L", "rho"])?;
    for row in rows {
        w.write_record([
            row.feature.to_string(),
            row.lead.to_string(),
            format!("{}", row.rho),
        ])?;
    }
    w.flush()?;
    Ok(())
}
