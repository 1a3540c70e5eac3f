//! Scalar prediction–correction filter over the linear state model.
//!
//! The filter forecasts throughput `L` samples ahead of each
//! measurement. Because a forecast made at step `n` is not consumable
//! until step `n + L`, pending predictions and their variances live in
//! a ring of `L + 1` slots indexed modulo `L + 1`.
//!
//! Step `n` (1-based):
//! * warm-up (`n <= L`): the estimate is the measurement itself, its
//!   variance zero, the gain zero;
//! * steady (`n > L`): the innovation variance is `S = P(n) + σ²_M`,
//!   the gain `K = P(n)/S`, the corrected estimate
//!   `x* = x̂(n) + K (x̃(n) − x̂(n))` with variance `P* = (1 − K) P(n)`;
//! * always: the new forecast is `x̂(n+L) = a3·x* + drift(u(n))` with
//!   variance `P(n+L) = a3²·P* + σ²_P`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlr::{FeatureVector, RegressionModel};

/// Output of one filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    /// Corrected estimate of the current sample, `x*(n)`.
    pub estimate: f64,
    /// Forecast for `lead` samples ahead, `x̂(n+L)`.
    pub predicted_ahead: f64,
    /// Variance of that forecast, `P(n+L)`.
    pub variance_ahead: f64,
    /// Correction gain `K(n)` used this step.
    pub gain: f64,
}

/// Diagnostics of the most recent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiag {
    /// Innovation variance `S(n) = P(n) + σ²_M`.
    pub innovation_var: f64,
    pub gain: f64,
    pub estimate: f64,
    /// Variance of the corrected estimate, `P*(n)`.
    pub estimate_var: f64,
}

/// The filter itself. Reusable across a whole trace; construct a fresh
/// one per stream.
#[derive(Debug, Clone)]
pub struct KftpFilter {
    model: RegressionModel,
    /// Pending forecasts for times `n .. n+L`, indexed `time % (L+1)`.
    xhat: Vec<f64>,
    /// Pending forecast variances, same indexing.
    pvar: Vec<f64>,
    /// Number of completed steps (the next step is `steps + 1`).
    steps: usize,
    last: Option<StepDiag>,
}

impl KftpFilter {
    pub fn new(model: RegressionModel) -> Result<Self> {
        if model.lead == 0 {
            return Err(Error::InvalidLead { lead: 0 });
        }
        let slots = model.lead + 1;
        Ok(KftpFilter {
            model,
            xhat: vec![0.0; slots],
            pvar: vec![0.0; slots],
            steps: 0,
            last: None,
        })
    }

    pub fn model(&self) -> &RegressionModel {
        &self.model
    }

    /// Completed steps so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Diagnostics of the most recent step, if any.
    pub fn last(&self) -> Option<&StepDiag> {
        self.last.as_ref()
    }

    fn slot(&self, time: usize) -> usize {
        time % (self.model.lead + 1)
    }

    /// Advance the filter by one measurement with its features
    /// (model domain). Returns the corrected estimate and the fresh
    /// `L`-ahead forecast.
    pub fn step(&mut self, measured: f64, features: &FeatureVector) -> Result<StepOutput> {
        let lead = self.model.lead;
        let n = self.steps + 1;
        let drift = self.model.drift(&FeatureVector {
            throughput: measured,
            ..*features
        })?;

        let (estimate, estimate_var, gain, innovation_var);
        if n <= lead {
            // Warm-up: trust the measurement outright.
            estimate = measured;
            estimate_var = 0.0;
            gain = 0.0;
            innovation_var = self.model.sigma2_m;
            let slot = self.slot(n);
            self.xhat[slot] = measured;
            self.pvar[slot] = 0.0;
        } else {
            let slot = self.slot(n);
            let predicted = self.xhat[slot];
            let p = self.pvar[slot];
            innovation_var = p + self.model.sigma2_m;
            // A zero innovation variance means a perfect model and a
            // noiseless measurement; keep the prediction as-is.
            gain = if innovation_var == 0.0 {
                0.0
            } else {
                p / innovation_var
            };
            estimate = predicted + gain * (measured - predicted);
            estimate_var = (1.0 - gain) * p;
        }

        let a3 = self.model.transition();
        let predicted_ahead = a3 * estimate + drift;
        let variance_ahead = a3 * a3 * estimate_var + self.model.sigma2_p;
        let write = self.slot(n + lead);
        self.xhat[write] = predicted_ahead;
        self.pvar[write] = variance_ahead;

        self.steps = n;
        self.last = Some(StepDiag {
            innovation_var,
            gain,
            estimate,
            estimate_var,
        });
        Ok(StepOutput {
            estimate,
            predicted_ahead,
            variance_ahead,
            gain,
        })
    }
}

/// One aligned row of a prediction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    /// 1-based sample index.
    pub n: usize,
    pub measured: f64,
    /// Filtered true value when available.
    #[serde(rename = "true")]
    pub truth: Option<f64>,
    /// Value forecast for this sample `lead` steps earlier (the
    /// measurement itself during warm-up).
    pub predicted: f64,
    /// Corrected estimate of this sample, when the predictor produces
    /// one.
    pub estimate: Option<f64>,
    /// Correction gain, when the predictor has one.
    pub gain: Option<f64>,
    pub warmup: bool,
}

/// A whole trace worth of aligned predictions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSeries {
    pub rows: Vec<PredictionRow>,
}

/// Per-step feature columns for a run (model domain). Slices must match
/// the measured series length.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureSeries<'a> {
    pub rsrp: Option<&'a [f64]>,
    pub sinr: Option<&'a [f64]>,
}

impl<'a> FeatureSeries<'a> {
    fn at(&self, i: usize) -> FeatureVector {
        FeatureVector {
            rsrp: self.rsrp.map(|s| s[i]),
            sinr: self.sinr.map(|s| s[i]),
            throughput: 0.0,
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        for slice in [self.rsrp, self.sinr].into_iter().flatten() {
            if slice.len() != n {
                return Err(Error::LengthMismatch {
                    left: slice.len(),
                    right: n,
                });
            }
        }
        Ok(())
    }
}

/// Run the filter over a full measured series and align forecasts with
/// the samples they targeted. Row `n` carries the forecast made at step
/// `n − L`; the first `L` rows are flagged warm-up and carry the
/// measurement itself, mirroring the warm-up branch.
pub fn run(
    model: &RegressionModel,
    measured: &[f64],
    features: &FeatureSeries,
    truth: Option<&[f64]>,
) -> Result<PredictionSeries> {
    let n = measured.len();
    let lead = model.lead;
    if n <= lead {
        return Err(Error::TraceTooShort {
            needed: lead + 1,
            actual: n,
        });
    }
    features.check_len(n)?;
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::LengthMismatch {
                left: t.len(),
                right: n,
            });
        }
    }

    let mut filter = KftpFilter::new(model.clone())?;
    let mut ahead = Vec::with_capacity(n);
    let mut estimates = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    for (i, &m) in measured.iter().enumerate() {
        let out = filter.step(m, &features.at(i))?;
        ahead.push(out.predicted_ahead);
        estimates.push(out.estimate);
        gains.push(out.gain);
    }

    let rows = (0..n)
        .map(|i| {
            let step = i + 1;
            let warmup = step <= lead;
            let predicted = if warmup { measured[i] } else { ahead[i - lead] };
            PredictionRow {
                n: step,
                measured: measured[i],
                truth: truth.map(|t| t[i]),
                predicted,
                estimate: Some(estimates[i]),
                gain: Some(gains[i]),
                warmup,
            }
        })
        .collect();
    Ok(PredictionSeries { rows })
}

impl PredictionSeries {
    /// Predicted column (one value per row).
    pub fn predicted(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.predicted).collect()
    }

    /// Rows that carry truth and (unless included) are past warm-up,
    /// as (predicted, truth) pairs — the scoring population.
    pub fn scored_pairs(&self, include_warmup: bool) -> (Vec<f64>, Vec<f64>) {
        let mut predicted = Vec::new();
        let mut truth = Vec::new();
        for row in &self.rows {
            if let Some(t) = row.truth {
                if include_warmup || !row.warmup {
                    predicted.push(row.predicted);
                    truth.push(t);
                }
            }
        }
        (predicted, truth)
    }

    /// Write rows as CSV: `n,measured,true,predicted,estimate,gain,warmup_flag`.
    /// Absent values are empty fields.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "n", "measured", "true", "predicted", "estimate", "gain", "warmup_flag",
        ])?;
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for row in &self.rows {
            w.write_record([
                row.n.to_string(),
                format!("{}", row.measured),
                fmt_opt(row.truth),
                format!("{}", row.predicted),
                fmt_opt(row.estimate),
                fmt_opt(row.gain),
                u8::from(row.warmup).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
