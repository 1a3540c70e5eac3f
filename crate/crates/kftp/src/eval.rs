//! End-to-end evaluation: split a trace chronologically, learn
//! normalization and a model on the training side only, then score a
//! predictor against the filtered truth of the held-out side.
//!
//! Metrics are computed in the normalized domain. Model-backed
//! predictors run there natively; history-only baselines consume raw
//! throughput and their forecasts are mapped into the normalized
//! domain for scoring, which leaves their rank under affine-invariant
//! metrics untouched.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::kalman::{run, FeatureSeries, PredictionRow, PredictionSeries};
use crate::metrics::{mae, r2_score, EvalReport};
use crate::mlr::{fit_trace, FeatureVector, RegressionModel};
use crate::predictor::{build, Observation, PredictorKind, PredictorParams};
use crate::preprocess::{estimate_noise, moving_average_filter};
use crate::trace::{normalize, split_train_test, Feature, ThroughputTrace};

/// Knobs for one evaluation run.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub predictor: PredictorKind,
    /// Moving-average window for the truth series, odd.
    pub window: usize,
    /// Prediction horizon, samples.
    pub lead: usize,
    /// Chronological share of the trace used for fitting.
    pub train_fraction: f64,
    pub params: PredictorParams,
    /// Score warm-up rows too (they carry measurement passthrough).
    pub include_warmup: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            predictor: PredictorKind::Kftp,
            window: 7,
            lead: 1,
            train_fraction: 0.8,
            params: PredictorParams::default(),
            include_warmup: false,
        }
    }
}

/// Everything one evaluation produces.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    /// Aligned per-sample predictions over the test side, normalized
    /// domain.
    pub series: PredictionSeries,
    /// The fitted model, for model-backed predictors.
    pub model: Option<RegressionModel>,
}

/// Pull a dense feature column out of a trace, failing loudly when the
/// fitted model expects it.
fn required_column(
    trace: &ThroughputTrace,
    feature: Feature,
    wanted: bool,
) -> Result<Option<Vec<f64>>> {
    if !wanted {
        return Ok(None);
    }
    trace
        .feature_column(feature)
        .map(Some)
        .ok_or(Error::FeatureMismatch {
            feature: feature.to_string(),
        })
}

/// Evaluate one predictor on one trace.
pub fn evaluate(trace: &ThroughputTrace, opts: &EvalOptions) -> Result<EvalOutcome> {
    if opts.lead == 0 {
        return Err(Error::InvalidLead { lead: 0 });
    }
    let (train_raw, test_raw) = split_train_test(trace, opts.train_fraction)?;
    let (train, params) = normalize(&train_raw, None)?;
    let (test, _) = normalize(&test_raw, Some(&params))?;
    let measured_test = test.throughput();
    let filtered_test = moving_average_filter(&measured_test, opts.window)?;
    let truth = &filtered_test.true_throughput;

    let (series, model, fit_seconds, predict_seconds) = match opts.predictor {
        PredictorKind::Kftp | PredictorKind::Mlr => {
            let measured_train = train.throughput();
            let filtered_train = moving_average_filter(&measured_train, opts.window)?;
            let noise = estimate_noise(&filtered_train);
            let fit_start = Instant::now();
            let model = fit_trace(
                &train,
                &filtered_train,
                &noise,
                opts.lead,
                Some(params.clone()),
            )?;
            let fit_seconds = fit_start.elapsed().as_secs_f64();

            let rsrp = required_column(&test, Feature::Rsrp, model.features.rsrp)?;
            let sinr = required_column(&test, Feature::Sinr, model.features.sinr)?;
            let n = measured_test.len();
            if n <= opts.lead {
                return Err(Error::TraceTooShort {
                    needed: opts.lead + 1,
                    actual: n,
                });
            }
            let predict_start = Instant::now();
            let series = if opts.predictor == PredictorKind::Kftp {
                let features = FeatureSeries {
                    rsrp: rsrp.as_deref(),
                    sinr: sinr.as_deref(),
                };
                run(&model, &measured_test, &features, Some(truth))?
            } else {
                // The bare state equation, driven by the measurement
                // at the decision sample — no correction step.
                let mut rows = Vec::with_capacity(n);
                for i in 0..n {
                    let warmup = i < opts.lead;
                    let predicted = if warmup {
                        measured_test[i]
                    } else {
                        let j = i - opts.lead;
                        let input = FeatureVector {
                            rsrp: rsrp.as_ref().map(|c| c[j]),
                            sinr: sinr.as_ref().map(|c| c[j]),
                            throughput: measured_test[j],
                        };
                        model.predict(&input)?
                    };
                    rows.push(PredictionRow {
                        n: i + 1,
                        measured: measured_test[i],
                        truth: Some(truth[i]),
                        predicted,
                        estimate: None,
                        gain: None,
                        warmup,
                    });
                }
                PredictionSeries { rows }
            };
            let predict_seconds = predict_start.elapsed().as_secs_f64() / n as f64;
            (series, Some(model), fit_seconds, predict_seconds)
        }
        kind => {
            let raw = test_raw.throughput();
            let n = raw.len();
            if n <= opts.lead {
                return Err(Error::TraceTooShort {
                    needed: opts.lead + 1,
                    actual: n,
                });
            }
            let mut predictor = build(kind, None, &opts.params)?;
            let mut forecast: Vec<Option<f64>> = vec![None; n];
            let predict_start = Instant::now();
            for k in 0..n {
                predictor.observe(&Observation::from_sample(&test_raw.samples[k]))?;
                // The forecast issued after sample k+1 lands `lead`
                // samples later.
                if k + opts.lead < n {
                    forecast[k + opts.lead] = Some(predictor.predict()?);
                }
            }
            let predict_seconds = predict_start.elapsed().as_secs_f64() / n as f64;
            let rows = (0..n)
                .map(|i| {
                    let predicted = match forecast[i] {
                        Some(raw_pred) => params.throughput.apply(raw_pred),
                        None => measured_test[i],
                    };
                    PredictionRow {
                        n: i + 1,
                        measured: measured_test[i],
                        truth: Some(truth[i]),
                        predicted,
                        estimate: None,
                        gain: None,
                        warmup: forecast[i].is_none(),
                    }
                })
                .collect();
            (PredictionSeries { rows }, None, 0.0, predict_seconds)
        }
    };

    let (predicted, truth_scored) = series.scored_pairs(opts.include_warmup);
    let r2 = r2_score(&predicted, &truth_scored)?;
    let mae = mae(&predicted, &truth_scored)?;
    Ok(EvalOutcome {
        report: EvalReport {
            dataset: trace.source_id.clone(),
            algorithm: opts.predictor.to_string(),
            lead: opts.lead,
            window: opts.window,
            r2,
            mae,
            n_samples: predicted.len(),
            fit_seconds,
            predict_seconds,
        },
        series,
        model,
    })
}
