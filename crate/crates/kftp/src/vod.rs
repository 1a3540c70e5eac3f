//! Video-on-demand streaming simulator with finite-horizon
//! model-predictive bitrate control.
//!
//! Session quality trades off three terms: total selected bitrate,
//! bitrate fluctuation between consecutive chunks, and rebuffering.
//! The controller enumerates every ladder assignment over a short
//! lookahead horizon, rolls the buffer forward under predicted
//! throughput, and commits the first chunk of the best-scoring plan.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::predictor::{Observation, Predictor};
use crate::trace::ThroughputTrace;

/// Floor applied to throughput forecasts before they enter download
/// times, so a pessimistic predictor cannot divide by zero.
pub const MIN_PREDICTION_BPS: f64 = 1e-3;

/// Tunables for a VoD session.
#[derive(Debug, Clone)]
pub struct VodConfig {
    /// Available encodings, bps, strictly ascending.
    pub bitrate_ladder: Vec<f64>,
    /// Playback duration of one chunk, seconds.
    pub chunk_len: f64,
    /// Chunks in the session.
    pub n_chunks: usize,
    /// Planning horizon, chunks.
    pub lookahead: usize,
    /// Weight on bitrate fluctuation.
    pub lambda: f64,
    /// Weight on rebuffering time.
    pub mu: f64,
    /// Buffered seconds of video at session start.
    pub startup_buffer: f64,
}

impl Default for VodConfig {
    fn default() -> Self {
        let chunk_len = 158.0 / 157.0;
        VodConfig {
            bitrate_ladder: vec![20e6, 40e6, 60e6, 80e6, 110e6, 160e6],
            chunk_len,
            n_chunks: 157,
            lookahead: 5,
            lambda: 1.0,
            mu: 160e6,
            startup_buffer: chunk_len,
        }
    }
}

impl VodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bitrate_ladder.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "bitrate ladder is empty".into(),
            });
        }
        if self.bitrate_ladder[0] <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: "bitrate ladder entries must be positive".into(),
            });
        }
        if self.bitrate_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig {
                reason: "bitrate ladder must be strictly ascending".into(),
            });
        }
        if self.chunk_len <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: "chunk length must be positive".into(),
            });
        }
        if self.n_chunks == 0 {
            return Err(Error::InvalidConfig {
                reason: "session needs at least one chunk".into(),
            });
        }
        if self.lookahead == 0 {
            return Err(Error::InvalidConfig {
                reason: "lookahead must be at least 1".into(),
            });
        }
        if self.lambda < 0.0 || self.mu < 0.0 {
            return Err(Error::InvalidConfig {
                reason: "penalty weights must be non-negative".into(),
            });
        }
        if self.startup_buffer < 0.0 {
            return Err(Error::InvalidConfig {
                reason: "startup buffer cannot be negative".into(),
            });
        }
        Ok(())
    }
}

/// `1(z) = max(z, 0)` — the rebuffering indicator.
#[inline]
pub fn indicator(z: f64) -> f64 {
    z.max(0.0)
}

/// Mutable session state threaded between chunk downloads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VodSessionState {
    /// Seconds of video buffered ahead of the playhead.
    pub buffer: f64,
    /// Bitrate of the previously committed chunk, if any.
    pub last_bitrate: Option<f64>,
    /// Next chunk to download.
    pub chunk_index: usize,
}

/// Session quality decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QoeReport {
    /// Total score: bitrate minus weighted fluctuation and stalls.
    pub qoe: f64,
    /// Sum of committed bitrates, bps.
    pub bitrate_sum: f64,
    /// Sum of absolute bitrate changes between consecutive chunks, bps.
    pub fluctuation_sum: f64,
    /// Total rebuffering time, seconds.
    pub stall_sum: f64,
    pub n_chunks: usize,
}

/// Score a completed (or hypothetical) chunk sequence.
///
/// `buffers[i]` is the buffer level when chunk `i`'s download begins;
/// the stall charged to chunk `i` is the download time in excess of
/// that buffer.
pub fn qoe_vod(
    bitrates: &[f64],
    capacities: &[f64],
    buffers: &[f64],
    cfg: &VodConfig,
) -> Result<QoeReport> {
    if bitrates.is_empty() {
        return Err(Error::EmptyHorizon);
    }
    if bitrates.len() != capacities.len() {
        return Err(Error::LengthMismatch {
            left: bitrates.len(),
            right: capacities.len(),
        });
    }
    if bitrates.len() != buffers.len() {
        return Err(Error::LengthMismatch {
            left: bitrates.len(),
            right: buffers.len(),
        });
    }
    let mut bitrate_sum = 0.0;
    let mut fluctuation_sum = 0.0;
    let mut stall_sum = 0.0;
    for i in 0..bitrates.len() {
        if capacities[i] <= 0.0 {
            return Err(Error::NonPositiveThroughput {
                value: capacities[i],
            });
        }
        bitrate_sum += bitrates[i];
        if i > 0 {
            fluctuation_sum += (bitrates[i] - bitrates[i - 1]).abs();
        }
        stall_sum += indicator(cfg.chunk_len * bitrates[i] / capacities[i] - buffers[i]);
    }
    Ok(QoeReport {
        qoe: bitrate_sum - cfg.lambda * fluctuation_sum - cfg.mu * stall_sum,
        bitrate_sum,
        fluctuation_sum,
        stall_sum,
        n_chunks: bitrates.len(),
    })
}

/// Pick the next chunk's bitrate by exhaustive horizon search.
///
/// Every ladder assignment over the horizon is scored under the given
/// throughput forecasts, rolling the buffer forward from the current
/// state; fluctuation counts the transition from the previously
/// committed chunk as well as switches inside the plan. Plans are
/// visited lowest rungs first and a candidate must score strictly
/// higher to displace the incumbent, so ties resolve to the gentler
/// plan.
pub fn fmpc_select(
    cfg: &VodConfig,
    state: &VodSessionState,
    predictions: &[f64],
) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyHorizon);
    }
    for &p in predictions {
        if p <= 0.0 {
            return Err(Error::NonPositiveThroughput { value: p });
        }
    }
    let horizon = predictions.len();
    let rungs = cfg.bitrate_ladder.len();
    let mut plan = vec![0usize; horizon];
    let mut best_qoe = f64::NEG_INFINITY;
    let mut best_first = cfg.bitrate_ladder[0];
    loop {
        let mut qoe = 0.0;
        let mut buffer = state.buffer;
        let mut prev = state.last_bitrate;
        for (i, &rung) in plan.iter().enumerate() {
            let bitrate = cfg.bitrate_ladder[rung];
            let download_time = cfg.chunk_len * bitrate / predictions[i];
            qoe += bitrate;
            if let Some(p) = prev {
                qoe -= cfg.lambda * (bitrate - p).abs();
            }
            qoe -= cfg.mu * indicator(download_time - buffer);
            buffer = (buffer - download_time).max(0.0) + cfg.chunk_len;
            prev = Some(bitrate);
        }
        if qoe > best_qoe {
            best_qoe = qoe;
            best_first = cfg.bitrate_ladder[plan[0]];
        }
        // Advance the plan odometer, last chunk fastest; wrapping the
        // first chunk means every assignment has been scored.
        let mut pos = horizon;
        loop {
            if pos == 0 {
                return Ok(best_first);
            }
            pos -= 1;
            plan[pos] += 1;
            if plan[pos] < rungs {
                break;
            }
            plan[pos] = 0;
        }
    }
}

/// What happened to one chunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChunkRecord {
    pub index: usize,
    /// Committed bitrate, bps.
    pub bitrate: f64,
    /// Realized download throughput, bps.
    pub throughput: f64,
    /// Buffer level when the download began, seconds.
    pub buffer_before: f64,
    /// Seconds the download took.
    pub download_time: f64,
    /// Seconds playback starved during this download.
    pub stall: f64,
}

/// A finished session: the score and its per-chunk log.
#[derive(Debug, Clone, PartialEq)]
pub struct VodOutcome {
    pub report: QoeReport,
    pub chunks: Vec<ChunkRecord>,
}

/// Play a whole session against a recorded trace.
///
/// Chunk `i` downloads at the trace's sample-`i` throughput. Before
/// each download the predictor forecasts link capacity for the
/// controller (held over the horizon); while the predictor is still
/// empty the session stays on the bottom rung. After the download the
/// realized sample is fed back as the next observation.
pub fn simulate_vod(
    trace: &ThroughputTrace,
    predictor: &mut dyn Predictor,
    cfg: &VodConfig,
) -> Result<VodOutcome> {
    cfg.validate()?;
    if trace.samples.len() < cfg.n_chunks {
        return Err(Error::TraceTooShort {
            needed: cfg.n_chunks,
            actual: trace.samples.len(),
        });
    }
    let mut state = VodSessionState {
        buffer: cfg.startup_buffer,
        last_bitrate: None,
        chunk_index: 0,
    };
    let mut chunks = Vec::with_capacity(cfg.n_chunks);
    for i in 0..cfg.n_chunks {
        let sample = &trace.samples[i];
        let capacity = sample.throughput;
        if capacity <= 0.0 {
            return Err(Error::NonPositiveThroughput { value: capacity });
        }
        let horizon = cfg.lookahead.min(cfg.n_chunks - i);
        let bitrate = match predictor.predict() {
            Ok(forecast) => {
                let forecast = forecast.max(MIN_PREDICTION_BPS);
                let predictions = vec![forecast; horizon];
                fmpc_select(cfg, &state, &predictions)?
            }
            // Nothing observed yet: start conservatively.
            Err(_) => cfg.bitrate_ladder[0],
        };
        let download_time = cfg.chunk_len * bitrate / capacity;
        let stall = indicator(download_time - state.buffer);
        chunks.push(ChunkRecord {
            index: i,
            bitrate,
            throughput: capacity,
            buffer_before: state.buffer,
            download_time,
            stall,
        });
        state.buffer = (state.buffer - download_time).max(0.0) + cfg.chunk_len;
        state.last_bitrate = Some(bitrate);
        state.chunk_index = i + 1;
        predictor.observe(&Observation::from_sample(sample))?;
    }
    let bitrates: Vec<f64> = chunks.iter().map(|c| c.bitrate).collect();
    let capacities: Vec<f64> = chunks.iter().map(|c| c.throughput).collect();
    let buffers: Vec<f64> = chunks.iter().map(|c| c.buffer_before).collect();
    let report = qoe_vod(&bitrates, &capacities, &buffers, cfg)?;
    Ok(VodOutcome { report, chunks })
}
