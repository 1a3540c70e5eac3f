//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: usage
//! errors (bad flag values), data errors (malformed or insufficient
//! input), and numerical errors (degenerate fits).

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
#[derive(Debug, Error)]
pub enum Error {
    // ─── Usage ───
    /// Unknown predictor name on the command line or in a config.
    #[error("unknown predictor '{name}' (expected one of: {expected})")]
    UnknownPredictor { name: String, expected: String },

    /// Prediction horizon must be at least one sample.
    #[error("invalid lead {lead}: must be >= 1 sample")]
    InvalidLead { lead: usize },

    /// EWMA smoothing factor outside (0, 1].
    #[error("invalid smoothing factor {alpha}: must be in (0, 1]")]
    InvalidAlpha { alpha: f64 },

    /// Moving-average window must be odd so the filter is centered.
    #[error("filter window {window} is even: a centered window must be odd")]
    EvenWindow { window: usize },

    /// A configuration value failed validation.
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    // ─── Data ───
    /// The CSV header lacks a column the schema mapped.
    #[error("column '{column}' missing from input")]
    MissingColumn { column: String },

    /// A required field failed to parse.
    #[error("row {row}: cannot parse '{value}' as {column}")]
    BadRow {
        row: usize,
        column: String,
        value: String,
    },

    /// Timestamps are not uniformly spaced (or not increasing).
    #[error("row {row}: sample spacing {actual}s deviates from period {expected}s")]
    NonUniformSampling {
        row: usize,
        expected: f64,
        actual: f64,
    },

    /// No usable samples.
    #[error("trace has no samples")]
    EmptyTrace,

    /// Input has fewer samples than the operation needs.
    #[error("trace too short: need at least {needed} samples, have {actual}")]
    TraceTooShort { needed: usize, actual: usize },

    /// Filter window longer than the series.
    #[error("filter window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },

    /// Not enough rows to fit or score.
    #[error("too few rows: need at least {needed}, have {actual}")]
    TooFewRows { needed: usize, actual: usize },

    /// Two series that must align have different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// An observation lacks a feature the model was fitted with.
    #[error("feature mismatch: model requires '{feature}' but the observation lacks it")]
    FeatureMismatch { feature: String },

    /// Throughput values must be strictly positive.
    #[error("non-positive throughput {value}")]
    NonPositiveThroughput { value: f64 },

    /// Predictor asked for a forecast before any observation.
    #[error("no observations yet: cannot predict from an empty history")]
    EmptyHistory,

    /// Filter asked for a forecast before its first step.
    #[error("filter has not observed any sample yet")]
    NotWarmedUp,

    /// Bitrate below the ladder minimum.
    #[error("rate {rate} is below the ladder minimum {min}")]
    BelowMinimum { rate: f64, min: f64 },

    /// Selector invoked with nothing left to plan.
    #[error("empty lookahead horizon")]
    EmptyHorizon,

    // ─── Numerical ───
    /// Design matrix is rank-deficient (collinear or constant features).
    #[error("rank-deficient design matrix: features are collinear or constant")]
    RankDeficient,

    /// A correlation or score needs variance the data does not have.
    #[error("zero variance in input series")]
    ZeroVariance,

    /// A normalization column has max == min.
    #[error("degenerate range for column '{column}': max equals min")]
    DegenerateRange { column: String },

    /// Physical quantity that must be positive was not.
    #[error("non-positive input: {what} must be > 0")]
    NonPositiveInput { what: String },

    // ─── Environment ───
    /// A dataset or model file could not be opened.
    #[error("cannot read '{path}': {source}")]
    FileAccess {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error: 1 usage, 2 data,
    /// 3 numerical.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            UnknownPredictor { .. }
            | InvalidLead { .. }
            | InvalidAlpha { .. }
            | EvenWindow { .. }
            | InvalidConfig { .. } => 1,
            RankDeficient | ZeroVariance | DegenerateRange { .. } | NonPositiveInput { .. } => 3,
            _ => 2,
        }
    }
}
