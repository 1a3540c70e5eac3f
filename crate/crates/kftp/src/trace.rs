//! Trace ingestion: CSV loading through a column-mapping sidecar,
//! min–max normalization, and chronological train/test splitting.
//!
//! A trace is a uniformly sampled throughput series with optional radio
//! features (RSRP, RSRQ, SINR) and device speed. Datasets differ in
//! column naming and units, so every CSV comes with a small JSON schema
//! that maps dataset columns onto the canonical fields and declares the
//! throughput unit.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on inter-sample spacing before a trace is
/// rejected as non-uniform.
const SPACING_TOLERANCE: f64 = 0.01;

/// One row of a trace. Optional fields are `None` when the dataset has
/// no such column or marks the value absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    /// Seconds since the start of the capture.
    pub timestamp: f64,
    /// Downlink throughput in bits per second (dimensionless after
    /// normalization).
    pub throughput: f64,
    /// Reference signal received power, dBm.
    pub rsrp: Option<f64>,
    /// Reference signal received quality, dB.
    pub rsrq: Option<f64>,
    /// Signal-to-interference-plus-noise ratio, dB.
    pub sinr: Option<f64>,
    /// Device speed, m/s.
    pub speed: Option<f64>,
}

/// A validated, uniformly sampled trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputTrace {
    /// Where the samples came from (file stem or generator tag).
    pub source_id: String,
    /// Constant spacing between samples, seconds.
    pub sample_period: f64,
    pub samples: Vec<TraceSample>,
}

/// Canonical per-sample quantities a trace can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Rsrp,
    Rsrq,
    Sinr,
    Speed,
    /// The (filtered) throughput itself, used when correlating the
    /// present series against its own future.
    Throughput,
}

impl Feature {
    /// Features that can appear as optional trace columns.
    pub const COLUMNS: [Feature; 4] = [Feature::Rsrp, Feature::Rsrq, Feature::Sinr, Feature::Speed];
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Feature::Rsrp => "rsrp",
            Feature::Rsrq => "rsrq",
            Feature::Sinr => "sinr",
            Feature::Speed => "speed",
            Feature::Throughput => "throughput",
        };
        f.write_str(name)
    }
}

impl TraceSample {
    /// Value of an optional column (`Throughput` always present).
    pub fn feature(&self, feature: Feature) -> Option<f64> {
        match feature {
            Feature::Rsrp => self.rsrp,
            Feature::Rsrq => self.rsrq,
            Feature::Sinr => self.sinr,
            Feature::Speed => self.speed,
            Feature::Throughput => Some(self.throughput),
        }
    }

    fn set_feature(&mut self, feature: Feature, value: Option<f64>) {
        match feature {
            Feature::Rsrp => self.rsrp = value,
            Feature::Rsrq => self.rsrq = value,
            Feature::Sinr => self.sinr = value,
            Feature::Speed => self.speed = value,
            Feature::Throughput => self.throughput = value.expect("throughput is required"),
        }
    }
}

impl ThroughputTrace {
    /// The throughput column as a dense series.
    pub fn throughput(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.throughput).collect()
    }

    /// A feature column as a dense series, `None` unless every sample
    /// carries the value (features are all-or-nothing; absent columns
    /// shrink the model instead of being imputed).
    pub fn feature_column(&self, feature: Feature) -> Option<Vec<f64>> {
        self.samples.iter().map(|s| s.feature(feature)).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Throughput unit declared by a dataset schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThroughputUnit {
    #[serde(rename = "bps", alias = "BPS")]
    Bps,
    #[serde(rename = "Kbps", alias = "kbps", alias = "KBPS")]
    Kbps,
    #[serde(rename = "Mbps", alias = "mbps", alias = "MBPS")]
    Mbps,
}

impl ThroughputUnit {
    /// Multiplier that converts a value in this unit to bits per second.
    pub fn to_bps(self) -> f64 {
        match self {
            ThroughputUnit::Bps => 1.0,
            ThroughputUnit::Kbps => 1e3,
            ThroughputUnit::Mbps => 1e6,
        }
    }
}

/// JSON sidecar mapping dataset columns onto canonical fields.
///
/// ```json
/// {
///   "timestamp": "Timestamp",
///   "throughput": "DL_bitrate",
///   "throughput_unit": "Kbps",
///   "rsrp": "RSRP",
///   "sinr": "SNR",
///   "speed": "Speed"
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    /// Dataset column holding seconds since capture start.
    pub timestamp: String,
    /// Dataset column holding downlink throughput.
    pub throughput: String,
    pub throughput_unit: ThroughputUnit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rsrp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rsrq: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<String>,
}

impl ColumnMapping {
    /// Read a mapping from a JSON file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::FileAccess {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    fn optional(&self, feature: Feature) -> Option<&str> {
        match feature {
            Feature::Rsrp => self.rsrp.as_deref(),
            Feature::Rsrq => self.rsrq.as_deref(),
            Feature::Sinr => self.sinr.as_deref(),
            Feature::Speed => self.speed.as_deref(),
            Feature::Throughput => None,
        }
    }
}

/// Load and validate a CSV trace through its column mapping.
///
/// Required fields (timestamp, throughput) must parse on every row;
/// a failure is reported with its 1-based data row number. Optional
/// fields that are empty or unparseable become absent. Timestamps must
/// be strictly increasing with constant spacing (tolerance
/// [`SPACING_TOLERANCE`]); throughput is converted to bits per second.
pub fn load_trace(csv_path: &Path, mapping: &ColumnMapping) -> Result<ThroughputTrace> {
    let file = std::fs::File::open(csv_path).map_err(|source| Error::FileAccess {
        path: csv_path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };

    let ts_idx = index_of(&mapping.timestamp)?;
    let tp_idx = index_of(&mapping.throughput)?;
    let mut feature_idx: BTreeMap<Feature, usize> = BTreeMap::new();
    for feature in Feature::COLUMNS {
        if let Some(name) = mapping.optional(feature) {
            feature_idx.insert(feature, index_of(name)?);
        }
    }

    let scale = mapping.throughput_unit.to_bps();
    let mut samples = Vec::new();
    for (row_number, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_number + 1; // 1-based data row, header excluded
        let required = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::BadRow {
                    row,
                    column: column.to_string(),
                    value: raw.to_string(),
                })
        };

        let timestamp = required(ts_idx, &mapping.timestamp)?;
        let throughput = required(tp_idx, &mapping.throughput)? * scale;
        let mut sample = TraceSample {
            timestamp,
            throughput,
            rsrp: None,
            rsrq: None,
            sinr: None,
            speed: None,
        };
        for (&feature, &idx) in &feature_idx {
            let value = record
                .get(idx)
                .and_then(|raw| raw.parse::<f64>().ok())
                .filter(|v| v.is_finite());
            sample.set_feature(feature, value);
        }
        samples.push(sample);
    }

    let source_id = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".to_string());
    build_trace(source_id, samples)
}

/// Validate sample spacing and assemble a trace from parsed rows.
pub fn build_trace(source_id: String, samples: Vec<TraceSample>) -> Result<ThroughputTrace> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if samples.len() < 2 {
        return Err(Error::TraceTooShort {
            needed: 2,
            actual: samples.len(),
        });
    }
    let period = samples[1].timestamp - samples[0].timestamp;
    if period <= 0.0 {
        return Err(Error::NonUniformSampling {
            row: 2,
            expected: period,
            actual: period,
        });
    }
    for (i, pair) in samples.windows(2).enumerate() {
        let gap = pair[1].timestamp - pair[0].timestamp;
        if gap <= 0.0 || (gap - period).abs() > SPACING_TOLERANCE * period {
            return Err(Error::NonUniformSampling {
                row: i + 2,
                expected: period,
                actual: gap,
            });
        }
    }
    Ok(ThroughputTrace {
        source_id,
        sample_period: period,
        samples,
    })
}

/// Min–max range of one normalized column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn fit(values: impl Iterator<Item = f64>, column: &str) -> Result<Range> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if !(max - min).is_finite() || max - min <= 0.0 {
            return Err(Error::DegenerateRange {
                column: column.to_string(),
            });
        }
        Ok(Range { min, max })
    }

    /// Map a raw value into [0, 1] over the fitted range (values outside
    /// the range land outside [0, 1], which is deliberate for test data).
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    /// Inverse of [`Range::apply`].
    pub fn invert(&self, v: f64) -> f64 {
        self.min + v * (self.max - self.min)
    }
}

/// Fitted min–max parameters for a trace: throughput always, features
/// only when the column is fully present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub throughput: Range,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rsrp: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rsrq: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<Range>,
}

impl NormalizationParams {
    /// Fit ranges on a trace (typically the training split).
    pub fn fit(trace: &ThroughputTrace) -> Result<Self> {
        let throughput = Range::fit(trace.samples.iter().map(|s| s.throughput), "throughput")?;
        let mut params = NormalizationParams {
            throughput,
            rsrp: None,
            rsrq: None,
            sinr: None,
            speed: None,
        };
        for feature in Feature::COLUMNS {
            if let Some(column) = trace.feature_column(feature) {
                let range = Range::fit(column.into_iter(), &feature.to_string())?;
                params.set(feature, Some(range));
            }
        }
        Ok(params)
    }

    pub fn feature_range(&self, feature: Feature) -> Option<Range> {
        match feature {
            Feature::Rsrp => self.rsrp,
            Feature::Rsrq => self.rsrq,
            Feature::Sinr => self.sinr,
            Feature::Speed => self.speed,
            Feature::Throughput => Some(self.throughput),
        }
    }

    fn set(&mut self, feature: Feature, range: Option<Range>) {
        match feature {
            Feature::Rsrp => self.rsrp = range,
            Feature::Rsrq => self.rsrq = range,
            Feature::Sinr => self.sinr = range,
            Feature::Speed => self.speed = range,
            Feature::Throughput => {
                self.throughput = range.expect("throughput range is required")
            }
        }
    }
}

/// Apply min–max normalization to a trace, fitting parameters on the
/// trace itself unless `params` supplies ranges fitted elsewhere
/// (e.g. on the training split). Columns without a fitted range pass
/// through unchanged.
pub fn normalize(
    trace: &ThroughputTrace,
    params: Option<&NormalizationParams>,
) -> Result<(ThroughputTrace, NormalizationParams)> {
    let params = match params {
        Some(p) => p.clone(),
        None => NormalizationParams::fit(trace)?,
    };
    let mut out = trace.clone();
    for sample in &mut out.samples {
        sample.throughput = params.throughput.apply(sample.throughput);
        for feature in Feature::COLUMNS {
            if let (Some(range), Some(v)) = (params.feature_range(feature), sample.feature(feature))
            {
                sample.set_feature(feature, Some(range.apply(v)));
            }
        }
    }
    Ok((out, params))
}

/// Undo [`normalize`] with the same parameters.
pub fn denormalize(trace: &ThroughputTrace, params: &NormalizationParams) -> ThroughputTrace {
    let mut out = trace.clone();
    for sample in &mut out.samples {
        sample.throughput = params.throughput.invert(sample.throughput);
        for feature in Feature::COLUMNS {
            if let (Some(range), Some(v)) = (params.feature_range(feature), sample.feature(feature))
            {
                sample.set_feature(feature, Some(range.invert(v)));
            }
        }
    }
    out
}

/// Chronological split: the first `floor(len * train_fraction)` samples
/// form the training trace, the rest the test trace.
pub fn split_train_test(
    trace: &ThroughputTrace,
    train_fraction: f64,
) -> Result<(ThroughputTrace, ThroughputTrace)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig {
            reason: format!("train fraction {train_fraction} must be in (0, 1)"),
        });
    }
    let n = trace.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::TraceTooShort {
            needed: 2,
            actual: n,
        });
    }
    let make = |samples: &[TraceSample]| ThroughputTrace {
        source_id: trace.source_id.clone(),
        sample_period: trace.sample_period,
        samples: samples.to_vec(),
    };
    Ok((make(&trace.samples[..n_train]), make(&trace.samples[n_train..])))
}
