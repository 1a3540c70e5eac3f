//! Low-latency live streaming simulator with chunked-transfer
//! downloads and model-predictive bitrate control.
//!
//! Segments are encoded in real time and split into chunks that become
//! available while the segment is still being produced, so a client at
//! the live edge can overlap transfer with encoding instead of waiting
//! for whole segments. Session quality rewards perceptual quality
//! (log-scaled bitrate) and penalizes stalls, quality switches,
//! end-to-end latency, and segments skipped to re-approach the live
//! edge.
//!
//! Latency is bookkept as the gap between the wall clock (which the
//! encoder tracks exactly) and the playback position: it grows while
//! playback is stalled or not yet started, and shrinks in whole
//! segments when the latency cap forces the client to skip ahead.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::predictor::{Observation, Predictor};
use crate::trace::ThroughputTrace;
use crate::vod::{indicator, MIN_PREDICTION_BPS};

/// Penalty weights for the live session score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QoeWeights {
    /// Reward per unit of perceptual quality.
    pub quality: f64,
    /// Penalty per second of rebuffering.
    pub stall: f64,
    /// Penalty per unit of quality switch between consecutive
    /// downloaded segments.
    pub fluctuation: f64,
    /// Penalty per unit of the sigmoid latency term.
    pub latency: f64,
    /// Penalty per skipped segment.
    pub drops: f64,
}

impl Default for QoeWeights {
    fn default() -> Self {
        QoeWeights {
            quality: 0.2,
            stall: 6.0,
            fluctuation: 1.0,
            latency: 0.8,
            drops: 1.2,
        }
    }
}

/// Tunables for a live session.
#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Available encodings, bps, strictly ascending.
    pub bitrate_ladder: Vec<f64>,
    /// Playback duration of one segment, seconds.
    pub segment_len: f64,
    /// Chunks the encoder emits per segment.
    pub chunks_per_segment: usize,
    /// Playback duration of one chunk, seconds; must tile the segment.
    pub chunk_len: f64,
    /// Segments in the broadcast.
    pub n_segments: usize,
    /// Planning horizon, segments.
    pub lookahead: usize,
    pub weights: QoeWeights,
    /// Sigmoid midpoint of the latency penalty, seconds.
    pub omega: f64,
    /// Latency cap: exceeding it skips segments, seconds.
    pub latency_max: f64,
    /// Buffered seconds required before playback starts.
    pub playback_threshold: f64,
    /// Segments already encoded when the client joins.
    pub alpha: usize,
    /// Backlog segments requested at join.
    pub beta: usize,
    /// Quality reference rate: the bottom of the ladder, bps.
    pub r_min: f64,
    /// Fixed per-request overhead, seconds.
    pub rtt: f64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            bitrate_ladder: vec![300e3, 500e3, 1e6, 2e6, 3e6, 6e6],
            segment_len: 1.0,
            chunks_per_segment: 5,
            chunk_len: 0.2,
            n_segments: 150,
            lookahead: 5,
            weights: QoeWeights::default(),
            omega: 4.0,
            latency_max: 5.0,
            playback_threshold: 2.0,
            alpha: 3,
            beta: 2,
            r_min: 300e3,
            rtt: 0.040,
        }
    }
}

impl LiveConfig {
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
        if self.r_min != self.bitrate_ladder[0] {
            return Err(Error::InvalidConfig {
                reason: "quality reference rate must equal the bottom ladder rung".into(),
            });
        }
        if self.segment_len <= 0.0 || self.chunk_len <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: "segment and chunk lengths must be positive".into(),
            });
        }
        if self.chunks_per_segment == 0 {
            return Err(Error::InvalidConfig {
                reason: "segments need at least one chunk".into(),
            });
        }
        let tiled = self.chunks_per_segment as f64 * self.chunk_len;
        if (tiled - self.segment_len).abs() > 1e-9 {
            return Err(Error::InvalidConfig {
                reason: "chunks must tile the segment exactly".into(),
            });
        }
        if self.beta == 0 || self.alpha < self.beta {
            return Err(Error::InvalidConfig {
                reason: "join needs alpha >= beta >= 1 encoded segments".into(),
            });
        }
        if self.n_segments < self.alpha {
            return Err(Error::InvalidConfig {
                reason: "broadcast must cover the join backlog".into(),
            });
        }
        if self.lookahead == 0 {
            return Err(Error::InvalidConfig {
                reason: "lookahead must be at least 1".into(),
            });
        }
        let w = &self.weights;
        if w.quality < 0.0 || w.stall < 0.0 || w.fluctuation < 0.0 || w.latency < 0.0 || w.drops < 0.0
        {
            return Err(Error::InvalidConfig {
                reason: "penalty weights must be non-negative".into(),
            });
        }
        if self.latency_max <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: "latency cap must be positive".into(),
            });
        }
        if self.playback_threshold < 0.0 || self.rtt < 0.0 {
            return Err(Error::InvalidConfig {
                reason: "playback threshold and rtt cannot be negative".into(),
            });
        }
        Ok(())
    }
}

/// Log-scaled perceptual quality: `ln(rate / reference)`, zero at the
/// bottom rung.
pub fn perceptual_quality(rate: f64, r_min: f64) -> Result<f64> {
    if r_min <= 0.0 {
        return Err(Error::NonPositiveInput {
            what: "quality reference rate".into(),
        });
    }
    if rate < r_min {
        return Err(Error::BelowMinimum { rate, min: r_min });
    }
    Ok((rate / r_min).ln())
}

/// Sigmoid latency penalty, shifted to vanish at zero latency:
/// `1/(1+e^(omega−l)) − 1/(1+e^omega)`.
pub fn latency_penalty(latency: f64, omega: f64) -> f64 {
    1.0 / (1.0 + (omega - latency).exp()) - 1.0 / (1.0 + omega.exp())
}

/// When the client finishes downloading a segment, given that chunk
/// `j` of segment `i` only exists once the encoder reaches live time
/// `(i−1)·segment_len + j·chunk_len`.
///
/// Returns the completion clock and the time spent idle waiting for
/// chunks to be encoded. A segment from the backlog (fully encoded)
/// downloads in `rtt + bitrate·segment_len/capacity` with zero idle; a
/// client at the live edge interleaves transfer with encoding instead
/// of waiting for the whole segment.
pub fn download_timing(
    cfg: &LiveConfig,
    segment: usize,
    bitrate: f64,
    capacity: f64,
    clock: f64,
) -> (f64, f64) {
    let seg_start = (segment as f64 - 1.0) * cfg.segment_len;
    let transfer = bitrate * cfg.chunk_len / capacity;
    let mut t = clock + cfg.rtt;
    let mut wait = 0.0;
    for j in 1..=cfg.chunks_per_segment {
        let ready = seg_start + j as f64 * cfg.chunk_len;
        if ready > t {
            wait += ready - t;
            t = ready;
        }
        t += transfer;
    }
    (t, wait)
}

/// Mutable session state threaded between segment downloads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiveSessionState {
    /// Seconds of video buffered ahead of the playhead.
    pub buffer: f64,
    /// Seconds the playback position trails the wall clock.
    pub latency: f64,
    /// Perceptual quality of the previously committed segment.
    pub last_quality: Option<f64>,
    /// Next segment to download, 1-based.
    pub segment_index: usize,
    /// Wall-clock time, seconds since the broadcast began.
    pub clock: f64,
}

/// Pick the next segment's bitrate by exhaustive horizon search.
///
/// Plans are scored at segment granularity with a fixed `rtt`
/// per-request overhead (the planner does not model encoder pacing).
/// Each planned segment contributes weighted quality minus stall,
/// switch, and latency penalties; when planned latency exceeds the cap
/// the skip penalty is charged and latency rewinds, without
/// re-indexing the remaining plan. Plans are visited lowest rungs
/// first and must win strictly, so ties resolve to the gentler plan.
pub fn mpc_chunk_select(
    cfg: &LiveConfig,
    state: &LiveSessionState,
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
    let w = &cfg.weights;
    let mut plan = vec![0usize; horizon];
    let mut best_qoe = f64::NEG_INFINITY;
    let mut best_first = cfg.bitrate_ladder[0];
    loop {
        let mut qoe = 0.0;
        let mut buffer = state.buffer;
        let mut latency = state.latency;
        let mut prev_quality = state.last_quality;
        for (i, &rung) in plan.iter().enumerate() {
            let bitrate = cfg.bitrate_ladder[rung];
            let download_time = bitrate * cfg.segment_len / predictions[i] + cfg.rtt;
            let stall = indicator(download_time - buffer);
            buffer = (buffer - download_time).max(0.0) + cfg.segment_len;
            latency += stall;
            let quality = perceptual_quality(bitrate, cfg.r_min)?;
            qoe += w.quality * quality - w.stall * stall;
            if let Some(p) = prev_quality {
                qoe -= w.fluctuation * (quality - p).abs();
            }
            prev_quality = Some(quality);
            if latency > cfg.latency_max {
                let dropped = ((latency - cfg.latency_max) / cfg.segment_len).ceil();
                latency -= dropped * cfg.segment_len;
                qoe -= w.drops * dropped;
            }
            qoe -= w.latency * latency_penalty(latency, cfg.omega);
        }
        if qoe > best_qoe {
            best_qoe = qoe;
            best_first = cfg.bitrate_ladder[plan[0]];
        }
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

/// What happened to one downloaded segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentRecord {
    /// Segment number in the broadcast, 1-based.
    pub index: usize,
    /// Committed bitrate, bps.
    pub bitrate: f64,
    /// Realized download throughput, bps.
    pub throughput: f64,
    /// Clock when the request went out.
    pub request_time: f64,
    /// Clock when the last chunk arrived.
    pub complete_time: f64,
    /// `complete_time − request_time`.
    pub download_time: f64,
    /// Portion of the download spent waiting on the encoder.
    pub wait_time: f64,
    /// Seconds playback starved during this download.
    pub stall: f64,
    /// Buffer level when the request went out, seconds.
    pub buffer_before: f64,
    /// End-to-end latency after this segment settled (stall added,
    /// skips applied), seconds.
    pub latency: f64,
    /// Segments skipped immediately after this one to honor the
    /// latency cap.
    pub dropped_after: usize,
}

/// Session quality decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiveQoeReport {
    /// Total weighted score.
    pub qoe: f64,
    /// Unweighted sum of per-segment perceptual quality.
    pub quality_sum: f64,
    /// Total rebuffering time, seconds.
    pub stall_sum: f64,
    /// Unweighted sum of quality switches between consecutive
    /// downloaded segments.
    pub fluctuation_sum: f64,
    /// Unweighted sum of the per-segment latency sigmoid.
    pub latency_penalty_sum: f64,
    /// Segments skipped over the whole session.
    pub drop_count: usize,
    /// Segments actually downloaded.
    pub n_segments: usize,
}

/// Score a downloaded-segment log.
pub fn qoe_live(records: &[SegmentRecord], cfg: &LiveConfig) -> Result<LiveQoeReport> {
    if records.is_empty() {
        return Err(Error::EmptyHorizon);
    }
    let w = &cfg.weights;
    let mut quality_sum = 0.0;
    let mut stall_sum = 0.0;
    let mut fluctuation_sum = 0.0;
    let mut latency_penalty_sum = 0.0;
    let mut drop_count = 0usize;
    let mut prev_quality: Option<f64> = None;
    for rec in records {
        let quality = perceptual_quality(rec.bitrate, cfg.r_min)?;
        quality_sum += quality;
        stall_sum += rec.stall;
        if let Some(p) = prev_quality {
            fluctuation_sum += (quality - p).abs();
        }
        prev_quality = Some(quality);
        latency_penalty_sum += latency_penalty(rec.latency, cfg.omega);
        drop_count += rec.dropped_after;
    }
    Ok(LiveQoeReport {
        qoe: w.quality * quality_sum
            - w.stall * stall_sum
            - w.fluctuation * fluctuation_sum
            - w.latency * latency_penalty_sum
            - w.drops * drop_count as f64,
        quality_sum,
        stall_sum,
        fluctuation_sum,
        latency_penalty_sum,
        drop_count,
        n_segments: records.len(),
    })
}

/// A finished session: the score and its per-segment log.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveOutcome {
    pub report: LiveQoeReport,
    pub segments: Vec<SegmentRecord>,
}

/// Play a live session against a recorded trace.
///
/// The client joins at wall clock `alpha·segment_len` with `alpha`
/// segments already encoded, requests the `beta` freshest of them at
/// the bottom rung, and starts playback — positioned `beta` segments
/// behind the clock — once the buffer reaches the playback threshold.
/// From there segments download sequentially: the controller picks a
/// rung from the predictor's forecast (bottom rung while the predictor
/// has nothing to say), chunk availability gates the transfer, stalls
/// stretch latency, and the latency cap skips segments to stay near
/// the live edge. Segment `i` downloads at the trace's sample-`i`
/// throughput; skipped segments consume neither a download nor a log
/// row.
pub fn simulate_live(
    trace: &ThroughputTrace,
    predictor: &mut dyn Predictor,
    cfg: &LiveConfig,
) -> Result<LiveOutcome> {
    cfg.validate()?;
    if trace.samples.len() < cfg.n_segments {
        return Err(Error::TraceTooShort {
            needed: cfg.n_segments,
            actual: trace.samples.len(),
        });
    }
    let zeta = cfg.segment_len;
    let mut state = LiveSessionState {
        buffer: 0.0,
        latency: cfg.beta as f64 * zeta,
        last_quality: None,
        segment_index: cfg.alpha - cfg.beta + 1,
        clock: cfg.alpha as f64 * zeta,
    };
    let mut playing = false;
    let mut downloaded = 0usize;
    let mut records = Vec::new();
    while state.segment_index <= cfg.n_segments {
        let seg = state.segment_index;
        let capacity = trace.samples[seg - 1].throughput;
        if capacity <= 0.0 {
            return Err(Error::NonPositiveThroughput { value: capacity });
        }
        let bitrate = if !playing {
            // Conservative startup: the backlog and any threshold
            // extension download at the bottom rung.
            cfg.bitrate_ladder[0]
        } else {
            match predictor.predict() {
                Ok(forecast) => {
                    let forecast = forecast.max(MIN_PREDICTION_BPS);
                    let horizon = cfg.lookahead.min(cfg.n_segments - seg + 1);
                    mpc_chunk_select(cfg, &state, &vec![forecast; horizon])?
                }
                Err(_) => cfg.bitrate_ladder[0],
            }
        };
        let request_time = state.clock;
        let buffer_before = state.buffer;
        let (complete, wait) = download_timing(cfg, seg, bitrate, capacity, state.clock);
        let download_time = complete - state.clock;
        let stall;
        if playing {
            stall = indicator(download_time - state.buffer);
            state.buffer = (state.buffer - download_time).max(0.0) + zeta;
            state.latency += stall;
        } else {
            // Playback has not started: the playhead is frozen, so the
            // whole download widens the gap to the clock instead of
            // draining the buffer.
            stall = 0.0;
            state.buffer += zeta;
            state.latency += download_time;
        }
        state.clock = complete;
        let mut dropped = 0usize;
        if state.latency > cfg.latency_max {
            dropped = ((state.latency - cfg.latency_max) / zeta).ceil() as usize;
            state.latency -= dropped as f64 * zeta;
        }
        records.push(SegmentRecord {
            index: seg,
            bitrate,
            throughput: capacity,
            request_time,
            complete_time: complete,
            download_time,
            wait_time: wait,
            stall,
            buffer_before,
            latency: state.latency,
            dropped_after: dropped,
        });
        state.last_quality = Some(perceptual_quality(bitrate, cfg.r_min)?);
        state.segment_index = seg + 1 + dropped;
        downloaded += 1;
        predictor.observe(&Observation::from_sample(&trace.samples[seg - 1]))?;
        if !playing && downloaded >= cfg.beta && state.buffer >= cfg.playback_threshold {
            playing = true;
        }
    }
    let report = qoe_live(&records, cfg)?;
    Ok(LiveOutcome {
        report,
        segments: records,
    })
}
