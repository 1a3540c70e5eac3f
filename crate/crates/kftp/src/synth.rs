//! Seeded synthetic trace generation.
//!
//! Everything random in the repo flows through a single ChaCha stream
//! keyed by one seed, so any experiment is reproducible from its seed
//! alone. The central generator simulates the linear state model
//! exactly — handy for experiments where the true parameters must be
//! known — plus simple random-walk/AR(1) streams and adversarial
//! outage traces for the simulators.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::mlr::{FeatureSet, RegressionModel};
use crate::trace::{build_trace, NormalizationParams, Range, ThroughputTrace, TraceSample};

/// The one RNG constructor: ChaCha8 keyed by the experiment seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian random walk: `x(n+1) = x(n) + N(0, step_std²)`.
pub fn random_walk(rng: &mut ChaCha8Rng, n: usize, x0: f64, step_std: f64) -> Vec<f64> {
    let noise = Normal::new(0.0, step_std).expect("valid std");
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        out.push(x);
        x += noise.sample(rng);
    }
    out
}

/// AR(1) stream: `x(n+1) = c + phi·x(n) + N(0, noise_std²)`.
pub fn ar1(rng: &mut ChaCha8Rng, n: usize, c: f64, phi: f64, noise_std: f64, x0: f64) -> Vec<f64> {
    let noise = Normal::new(0.0, noise_std).expect("valid std");
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        out.push(x);
        x = c + phi * x + noise.sample(rng);
    }
    out
}

/// Ground-truth parameters of a synthetic world that follows the linear
/// state equation at lead 1.
#[derive(Debug, Clone, Copy)]
pub struct LinearWorld {
    /// `[bias, rsrp, sinr, throughput]` coefficients.
    pub coefficients: [f64; 4],
    /// Process noise standard deviation.
    pub sigma_p: f64,
    /// Measurement noise standard deviation.
    pub sigma_m: f64,
}

impl Default for LinearWorld {
    fn default() -> Self {
        // Stationary mean ≈ 0.6 in normalized units; enough feature
        // drive that the optional columns matter.
        LinearWorld {
            coefficients: [0.05, 0.10, 0.10, 0.75],
            sigma_p: 0.05,
            sigma_m: 0.06,
        }
    }
}

/// Series drawn from a [`LinearWorld`].
#[derive(Debug, Clone)]
pub struct SynthSeries {
    /// Latent true throughput.
    pub truth: Vec<f64>,
    /// Truth plus measurement noise.
    pub measured: Vec<f64>,
    pub rsrp: Vec<f64>,
    pub sinr: Vec<f64>,
}

impl LinearWorld {
    /// Simulate `n` samples: features follow smooth bounded AR(1)
    /// drifts, the truth follows the state equation with process noise,
    /// and measurements add independent measurement noise.
    pub fn generate(&self, rng: &mut ChaCha8Rng, n: usize) -> SynthSeries {
        let [a0, a1, a2, a3] = self.coefficients;
        let process = Normal::new(0.0, self.sigma_p).expect("valid std");
        let measure = Normal::new(0.0, self.sigma_m).expect("valid std");
        let feature_noise = Normal::new(0.0, 0.05).expect("valid std");

        let mut u1 = Vec::with_capacity(n);
        let mut u2 = Vec::with_capacity(n);
        let (mut f1, mut f2): (f64, f64) = (0.5, 0.5);
        for _ in 0..n {
            u1.push(f1);
            u2.push(f2);
            f1 = (0.05 + 0.9 * f1 + feature_noise.sample(rng)).clamp(0.0, 1.0);
            f2 = (0.05 + 0.9 * f2 + feature_noise.sample(rng)).clamp(0.0, 1.0);
        }

        let mut truth = Vec::with_capacity(n);
        let mut x = rng.random_range(0.3..0.7);
        for i in 0..n {
            truth.push(x);
            x = a0 + a1 * u1[i] + a2 * u2[i] + a3 * x + process.sample(rng);
        }
        let measured = truth.iter().map(|t| t + measure.sample(rng)).collect();
        SynthSeries {
            truth,
            measured,
            rsrp: u1,
            sinr: u2,
        }
    }

    /// The matched model: true coefficients and noise variances, no
    /// normalization (the world already lives in model units).
    pub fn model(&self) -> RegressionModel {
        RegressionModel {
            coefficients: self.coefficients.to_vec(),
            lead: 1,
            sigma2_p: self.sigma_p * self.sigma_p,
            sigma2_m: self.sigma_m * self.sigma_m,
            features: FeatureSet {
                rsrp: true,
                sinr: true,
            },
            normalization: None,
        }
    }
}

impl SynthSeries {
    /// Wrap the measured series (optionally mapped onto a raw
    /// throughput range) as a loadable trace, features riding along.
    pub fn to_trace(&self, source_id: &str, throughput_range: Option<Range>) -> ThroughputTrace {
        let samples = (0..self.measured.len())
            .map(|i| {
                let raw = match throughput_range {
                    Some(r) => r.invert(self.measured[i]),
                    None => self.measured[i],
                };
                TraceSample {
                    timestamp: i as f64,
                    throughput: raw,
                    rsrp: Some(self.rsrp[i]),
                    rsrq: None,
                    sinr: Some(self.sinr[i]),
                    speed: None,
                }
            })
            .collect();
        build_trace(source_id.to_string(), samples).expect("synthetic trace is well-formed")
    }

    /// Normalization parameters matching [`SynthSeries::to_trace`] with
    /// the same range: throughput maps back to model units, features
    /// are already unit-scaled.
    pub fn normalization(throughput_range: Range) -> NormalizationParams {
        NormalizationParams {
            throughput: throughput_range,
            rsrp: Some(Range { min: 0.0, max: 1.0 }),
            rsrq: None,
            sinr: Some(Range { min: 0.0, max: 1.0 }),
            speed: None,
        }
    }
}

/// Throughput trace with periodic deep outages — adversarial input for
/// the streaming simulators.
pub fn outage_trace(
    rng: &mut ChaCha8Rng,
    n: usize,
    base_bps: f64,
    outage_every: usize,
    outage_len: usize,
    floor_bps: f64,
) -> Vec<f64> {
    let jitter = Normal::new(0.0, base_bps * 0.15).expect("valid std");
    (0..n)
        .map(|i| {
            let in_outage = outage_every > 0 && i % outage_every < outage_len;
            if in_outage {
                floor_bps
            } else {
                (base_bps + jitter.sample(rng)).max(floor_bps)
            }
        })
        .collect()
}

/// Wrap a plain throughput series as a featureless trace.
pub fn series_to_trace(source_id: &str, throughput_bps: &[f64]) -> ThroughputTrace {
    let samples = throughput_bps
        .iter()
        .enumerate()
        .map(|(i, &tp)| TraceSample {
            timestamp: i as f64,
            throughput: tp,
            rsrp: None,
            rsrq: None,
            sinr: None,
            speed: None,
        })
        .collect();
    build_trace(source_id.to_string(), samples).expect("synthetic trace is well-formed")
}
