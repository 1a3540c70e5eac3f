//! Linear state model over lagged network features.
//!
//! The model explains true throughput `L` samples ahead as an affine
//! function of the present radio features and the present true
//! throughput:
//!
//! `x(n+L) = a0 + a1*u1(n) + a2*u2(n) + a3*x(n)`
//!
//! Optional features that a dataset lacks simply shrink the coefficient
//! vector — nothing is imputed. The fit solves least squares via an
//! orthogonal decomposition and records the population variance of its
//! training residuals, which doubles as the process-noise variance of
//! the prediction filter built on top of the model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{FilteredTrace, NoiseModel};
use crate::trace::{Feature, NormalizationParams, ThroughputTrace};

/// Relative singular-value cutoff below which the design matrix is
/// treated as rank-deficient.
const RANK_EPS: f64 = 1e-10;

/// Which optional features a model was fitted with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureSet {
    pub rsrp: bool,
    pub sinr: bool,
}

impl FeatureSet {
    /// Number of fitted coefficients: bias + active features + throughput.
    pub fn dim(&self) -> usize {
        2 + usize::from(self.rsrp) + usize::from(self.sinr)
    }
}

/// Inputs to one prediction: present features plus present throughput.
/// All values live in the model's (normalized) domain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    pub rsrp: Option<f64>,
    pub sinr: Option<f64>,
    pub throughput: f64,
}

/// A fitted linear state model.
///
/// Coefficient order is `[bias, rsrp?, sinr?, throughput]` with the
/// optional entries present exactly when [`FeatureSet`] activates them;
/// the throughput coefficient is always last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub coefficients: Vec<f64>,
    /// Prediction horizon in samples.
    pub lead: usize,
    /// Population variance of the training residuals (process noise).
    pub sigma2_p: f64,
    /// Measurement-noise variance copied from the trace's noise model.
    pub sigma2_m: f64,
    pub features: FeatureSet,
    /// Min–max parameters the training data was normalized with, when
    /// the model operates in a normalized domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationParams>,
}

impl RegressionModel {
    /// The affine part of the state equation: bias plus feature terms,
    /// excluding the throughput term.
    pub fn drift(&self, input: &FeatureVector) -> Result<f64> {
        let mut acc = self.coefficients[0];
        let mut idx = 1;
        if self.features.rsrp {
            let u = input.rsrp.ok_or(Error::FeatureMismatch {
                feature: "rsrp".into(),
            })?;
            acc += self.coefficients[idx] * u;
            idx += 1;
        }
        if self.features.sinr {
            let u = input.sinr.ok_or(Error::FeatureMismatch {
                feature: "sinr".into(),
            })?;
            acc += self.coefficients[idx] * u;
        }
        Ok(acc)
    }

    /// The throughput coefficient (state transition factor).
    pub fn transition(&self) -> f64 {
        *self.coefficients.last().expect("model has coefficients")
    }

    /// Predict throughput `lead` samples ahead of the given input.
    pub fn predict(&self, input: &FeatureVector) -> Result<f64> {
        Ok(self.drift(input)? + self.transition() * input.throughput)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Aligned training columns. `truth` is the filtered true throughput;
/// feature slices, when given, must match its length.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSeries<'a> {
    pub truth: &'a [f64],
    pub rsrp: Option<&'a [f64]>,
    pub sinr: Option<&'a [f64]>,
}

/// Least-squares fit of the state equation at horizon `lead`.
///
/// Rows pair `[1, u1(n), u2(n), x(n)]` with target `x(n+lead)` for
/// every `n` with both ends in range. `sigma2_m` is carried into the
/// model unchanged.
pub fn fit(series: &TrainingSeries, lead: usize, sigma2_m: f64) -> Result<RegressionModel> {
    if lead == 0 {
        return Err(Error::InvalidLead { lead });
    }
    let n = series.truth.len();
    for slice in [series.rsrp, series.sinr].into_iter().flatten() {
        if slice.len() != n {
            return Err(Error::LengthMismatch {
                left: slice.len(),
                right: n,
            });
        }
    }
    let features = FeatureSet {
        rsrp: series.rsrp.is_some(),
        sinr: series.sinr.is_some(),
    };
    let dim = features.dim();
    let rows = n.saturating_sub(lead);
    if rows < dim {
        return Err(Error::TooFewRows {
            needed: dim + lead,
            actual: n,
        });
    }

    let mut design = DMatrix::<f64>::zeros(rows, dim);
    let mut target = DVector::<f64>::zeros(rows);
    for r in 0..rows {
        let mut c = 0;
        design[(r, c)] = 1.0;
        c += 1;
        if let Some(u1) = series.rsrp {
            design[(r, c)] = u1[r];
            c += 1;
        }
        if let Some(u2) = series.sinr {
            design[(r, c)] = u2[r];
            c += 1;
        }
        design[(r, c)] = series.truth[r];
        target[r] = series.truth[r + lead];
    }

    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let eps = s_max * RANK_EPS;
    if svd.rank(eps) < dim {
        return Err(Error::RankDeficient);
    }
    let solution = svd.solve(&target, eps).map_err(|_| Error::RankDeficient)?;
    let coefficients: Vec<f64> = solution.iter().copied().collect();

    // Population variance of the residuals on the training rows.
    let residuals: Vec<f64> = (0..rows)
        .map(|r| {
            let mut pred = 0.0;
            for c in 0..dim {
                pred += design[(r, c)] * coefficients[c];
            }
            target[r] - pred
        })
        .collect();
    let mean = residuals.iter().sum::<f64>() / rows as f64;
    let sigma2_p = residuals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;

    Ok(RegressionModel {
        coefficients,
        lead,
        sigma2_p,
        sigma2_m,
        features,
        normalization: None,
    })
}

/// Fit from a (normalized) trace and its filtered series: features are
/// active only when fully present, the noise model supplies the
/// measurement variance, and the normalization parameters ride along in
/// the model.
pub fn fit_trace(
    trace: &ThroughputTrace,
    filtered: &FilteredTrace,
    noise: &NoiseModel,
    lead: usize,
    normalization: Option<NormalizationParams>,
) -> Result<RegressionModel> {
    if trace.len() != filtered.len() {
        return Err(Error::LengthMismatch {
            left: trace.len(),
            right: filtered.len(),
        });
    }
    let rsrp = trace.feature_column(Feature::Rsrp);
    let sinr = trace.feature_column(Feature::Sinr);
    let series = TrainingSeries {
        truth: &filtered.true_throughput,
        rsrp: rsrp.as_deref(),
        sinr: sinr.as_deref(),
    };
    let mut model = fit(&series, lead, noise.sigma2_m)?;
    model.normalization = normalization;
    Ok(model)
}
