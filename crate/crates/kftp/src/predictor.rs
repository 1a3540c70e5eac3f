//! Common forecaster interface and the predictor zoo.
//!
//! A predictor consumes raw-unit observations (throughput in bps plus
//! whatever features the trace carries) one at a time and forecasts
//! the next chunk's throughput in the same raw units. History-only
//! baselines (harmonic mean, EWMA, persistence) use the throughput
//! series alone; the model-backed predictors normalize on observe and
//! denormalize on predict using the parameters stored in their model.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kalman::KftpFilter;
use crate::mlr::{FeatureVector, RegressionModel};
use crate::trace::{Feature, NormalizationParams, TraceSample};

/// One raw-unit observation handed to a predictor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    /// Realized throughput, bps.
    pub throughput: f64,
    pub rsrp: Option<f64>,
    pub sinr: Option<f64>,
}

impl Observation {
    pub fn from_sample(sample: &TraceSample) -> Self {
        Observation {
            throughput: sample.throughput,
            rsrp: sample.rsrp,
            sinr: sample.sinr,
        }
    }
}

/// A causal throughput forecaster: observations strictly precede the
/// predictions they inform.
pub trait Predictor {
    /// Ingest the next observation.
    fn observe(&mut self, obs: &Observation) -> Result<()>;
    /// Forecast upcoming throughput (bps) from everything observed so
    /// far.
    fn predict(&self) -> Result<f64>;
}

/// Harmonic mean of the last `window` throughput samples — the
/// heavy-tail-robust baseline classic ABR stacks use.
#[derive(Debug, Clone)]
pub struct HarmonicMean {
    window: usize,
    history: VecDeque<f64>,
}

/// Harmonic mean of a slice: `n / Σ(1/cᵢ)`. Every value must be
/// strictly positive.
pub fn harmonic_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut inv_sum = 0.0;
    for &v in values {
        if v <= 0.0 {
            return Err(Error::NonPositiveThroughput { value: v });
        }
        inv_sum += 1.0 / v;
    }
    Ok(values.len() as f64 / inv_sum)
}

impl HarmonicMean {
    /// Default history depth.
    pub const DEFAULT_WINDOW: usize = 5;

    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidConfig {
                reason: "harmonic-mean window must be at least 1".into(),
            });
        }
        Ok(HarmonicMean {
            window,
            history: VecDeque::new(),
        })
    }
}

impl Predictor for HarmonicMean {
    fn observe(&mut self, obs: &Observation) -> Result<()> {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(obs.throughput);
        Ok(())
    }

    fn predict(&self) -> Result<f64> {
        let (a, b) = self.history.as_slices();
        if b.is_empty() {
            harmonic_mean(a)
        } else {
            let joined: Vec<f64> = self.history.iter().copied().collect();
            harmonic_mean(&joined)
        }
    }
}

/// Exponentially weighted moving average:
/// `s(n) = α·c(n) + (1−α)·s(n−1)`, seeded with the first observation.
#[derive(Debug, Clone)]
pub struct Ewma {
    alpha: f64,
    state: Option<f64>,
}

impl Ewma {
    /// Default smoothing factor.
    pub const DEFAULT_ALPHA: f64 = 0.5;

    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidAlpha { alpha });
        }
        Ok(Ewma { alpha, state: None })
    }
}

impl Predictor for Ewma {
    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.state = Some(match self.state {
            None => obs.throughput,
            Some(s) => self.alpha * obs.throughput + (1.0 - self.alpha) * s,
        });
        Ok(())
    }

    fn predict(&self) -> Result<f64> {
        self.state.ok_or(Error::EmptyHistory)
    }
}

/// Last observation carried forward.
#[derive(Debug, Clone, Default)]
pub struct Persistence {
    last: Option<f64>,
}

impl Persistence {
    pub fn new() -> Self {
        Persistence::default()
    }
}

impl Predictor for Persistence {
    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.last = Some(obs.throughput);
        Ok(())
    }

    fn predict(&self) -> Result<f64> {
        self.last.ok_or(Error::EmptyHistory)
    }
}

/// Normalize an observation into a model-domain feature vector.
fn normalized_input(
    obs: &Observation,
    normalization: Option<&NormalizationParams>,
) -> FeatureVector {
    let map = |feature: Feature, v: Option<f64>| match (v, normalization) {
        (Some(raw), Some(p)) => Some(
            p.feature_range(feature)
                .map(|r| r.apply(raw))
                .unwrap_or(raw),
        ),
        (v, _) => v,
    };
    let throughput = match normalization {
        Some(p) => p.throughput.apply(obs.throughput),
        None => obs.throughput,
    };
    FeatureVector {
        rsrp: map(Feature::Rsrp, obs.rsrp),
        sinr: map(Feature::Sinr, obs.sinr),
        throughput,
    }
}

fn denormalize_output(v: f64, normalization: Option<&NormalizationParams>) -> f64 {
    match normalization {
        Some(p) => p.throughput.invert(v),
        None => v,
    }
}

/// The fitted state equation driven directly by measured throughput —
/// no correction step, the model baseline.
#[derive(Debug, Clone)]
pub struct MlrPredictor {
    model: RegressionModel,
    last: Option<Observation>,
}

impl MlrPredictor {
    pub fn new(model: RegressionModel) -> Self {
        MlrPredictor { model, last: None }
    }
}

impl Predictor for MlrPredictor {
    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.last = Some(*obs);
        Ok(())
    }

    fn predict(&self) -> Result<f64> {
        let obs = self.last.as_ref().ok_or(Error::EmptyHistory)?;
        let input = normalized_input(obs, self.model.normalization.as_ref());
        let ahead = self.model.predict(&input)?;
        Ok(denormalize_output(ahead, self.model.normalization.as_ref()))
    }
}

/// The prediction–correction filter as a forecaster.
///
/// During warm-up (at most `lead` observations so far) the forecast is
/// the latest measurement, matching the filter's initialization branch;
/// afterwards it is the freshest `lead`-ahead filter output, which
/// equals the aligned run() series element-wise past warm-up.
#[derive(Debug, Clone)]
pub struct KftpPredictor {
    filter: KftpFilter,
    last_measured: Option<f64>,
    last_ahead: Option<f64>,
}

impl KftpPredictor {
    pub fn new(model: RegressionModel) -> Result<Self> {
        Ok(KftpPredictor {
            filter: KftpFilter::new(model)?,
            last_measured: None,
            last_ahead: None,
        })
    }
}

impl Predictor for KftpPredictor {
    fn observe(&mut self, obs: &Observation) -> Result<()> {
        let normalization = self.filter.model().normalization.clone();
        let input = normalized_input(obs, normalization.as_ref());
        let out = self.filter.step(input.throughput, &input)?;
        self.last_measured = Some(obs.throughput);
        self.last_ahead = Some(denormalize_output(out.predicted_ahead, normalization.as_ref()));
        Ok(())
    }

    fn predict(&self) -> Result<f64> {
        if self.filter.steps() == 0 {
            return Err(Error::NotWarmedUp);
        }
        if self.filter.steps() <= self.filter.model().lead {
            Ok(self.last_measured.expect("observed at least once"))
        } else {
            Ok(self.last_ahead.expect("observed at least once"))
        }
    }
}

/// Predictor selection by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictorKind {
    Kftp,
    Mlr,
    Harmonic,
    Ewma,
    Persistence,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 5] = [
        PredictorKind::Kftp,
        PredictorKind::Mlr,
        PredictorKind::Harmonic,
        PredictorKind::Ewma,
        PredictorKind::Persistence,
    ];

    /// Whether this predictor needs a fitted model.
    pub fn needs_model(&self) -> bool {
        matches!(self, PredictorKind::Kftp | PredictorKind::Mlr)
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PredictorKind::Kftp => "kftp",
            PredictorKind::Mlr => "mlr",
            PredictorKind::Harmonic => "harmonic",
            PredictorKind::Ewma => "ewma",
            PredictorKind::Persistence => "persistence",
        };
        f.write_str(name)
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kftp" => Ok(PredictorKind::Kftp),
            "mlr" => Ok(PredictorKind::Mlr),
            "harmonic" => Ok(PredictorKind::Harmonic),
            "ewma" => Ok(PredictorKind::Ewma),
            "persistence" => Ok(PredictorKind::Persistence),
            other => Err(Error::UnknownPredictor {
                name: other.to_string(),
                expected: PredictorKind::ALL.map(|k| k.to_string()).join(", "),
            }),
        }
    }
}

/// Tunables for the history-only baselines.
#[derive(Debug, Clone, Copy)]
pub struct PredictorParams {
    pub harmonic_window: usize,
    pub ewma_alpha: f64,
}

impl Default for PredictorParams {
    fn default() -> Self {
        PredictorParams {
            harmonic_window: HarmonicMean::DEFAULT_WINDOW,
            ewma_alpha: Ewma::DEFAULT_ALPHA,
        }
    }
}

/// Construct a predictor by kind. Model-backed kinds require a model.
pub fn build(
    kind: PredictorKind,
    model: Option<RegressionModel>,
    params: &PredictorParams,
) -> Result<Box<dyn Predictor>> {
    let need_model = || {
        model.clone().ok_or_else(|| Error::InvalidConfig {
            reason: format!("predictor '{kind}' needs a fitted model"),
        })
    };
    Ok(match kind {
        PredictorKind::Kftp => Box::new(KftpPredictor::new(need_model()?)?),
        PredictorKind::Mlr => Box::new(MlrPredictor::new(need_model()?)),
        PredictorKind::Harmonic => Box::new(HarmonicMean::new(params.harmonic_window)?),
        PredictorKind::Ewma => Box::new(Ewma::new(params.ewma_alpha)?),
        PredictorKind::Persistence => Box::new(Persistence::new()),
    })
}
