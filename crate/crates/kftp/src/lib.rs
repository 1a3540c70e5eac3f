//! Throughput prediction and streaming-QoE simulation for cellular traces.
//!
//! The pipeline runs: ingest a CSV trace plus a JSON column-mapping sidecar
//! ([`trace`]), denoise the measured throughput with a centered
//! moving-average filter and characterize the residual noise
//! ([`preprocess`]), fit a linear state model over lagged network features
//! ([`mlr`]), and run a scalar prediction–correction filter on top of that
//! model to forecast throughput `L` samples ahead ([`kalman`]). Baseline
//! forecasters and a common predictor interface live in [`predictor`],
//! scoring utilities in [`metrics`], and trace-driven video-on-demand /
//! live-streaming simulators with model-predictive bitrate selection in
//! [`vod`] and [`live`]. [`eval`] wires the pieces into a
//! split/fit/score pipeline and [`synth`] generates seeded synthetic
//! traces for experiments.

#![forbid(unsafe_code)]

pub mod error;
pub mod eval;
pub mod kalman;
pub mod live;
pub mod metrics;
pub mod mlr;
pub mod predictor;
pub mod preprocess;
pub mod synth;
pub mod trace;
pub mod vod;

pub use error::{Error, Result};
