//! Sliding-window statistics over (magnified) absorbance series.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::{AbsorbanceSeries, ChannelMap, HydrationLabel, NUM_CHANNELS};

/// Bumped whenever the statistic set or ordering changes.
pub const FEATURE_VERSION: u16 = 1;

/// Statistic names in feature order within one channel.
pub const STAT_NAMES: [&str; 6] = ["mean", "std", "min", "max", "rms", "meanabsdiff"];

pub const STATS_PER_CHANNEL: usize = STAT_NAMES.len();
pub const FEATURE_DIM: usize = NUM_CHANNELS * STATS_PER_CHANNEL;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("series of {len} samples holds no full window of {window} samples")]
    TooShort { len: usize, window: usize },
    #[error("invalid window spec: {0}")]
    InvalidWindow(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSpec {
    pub length_s: f64,
    pub stride_s: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length_s: 60.0,
            stride_s: 10.0,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.length_s > 0.0 && self.stride_s > 0.0) {
            return Err(FeatureError::InvalidWindow(
                "length and stride must be positive".into(),
            ));
        }
        if self.stride_s > self.length_s {
            return Err(FeatureError::InvalidWindow(
                "stride must not exceed length".into(),
            ));
        }
        Ok(())
    }

    /// Window and stride in samples at `rate_hz`.
    pub fn samples(&self, rate_hz: f64) -> Result<(usize, usize), FeatureError> {
        self.validate()?;
        let window = (self.length_s * rate_hz).round() as usize;
        let stride = (self.stride_s * rate_hz).round() as usize;
        if window < 2 || stride < 1 {
            return Err(FeatureError::InvalidWindow(format!(
                "window of {window} samples / stride {stride} at {rate_hz} Hz is too small"
            )));
        }
        Ok((window, stride))
    }
}

/// Number of full windows in a series of `len` samples.
pub fn window_count(len: usize, window: usize, stride: usize) -> usize {
    if len < window {
        0
    } else {
        (len - window) / stride + 1
    }
}

/// One window's feature values, channel-major: `values[c * 6 + s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub window_start_ms: i64,
    pub window_end_ms: i64,
}

/// `[mean, std, min, max, rms, meanabsdiff]` of one window (population std).
pub fn window_stats(x: &[f64]) -> [f64; STATS_PER_CHANNEL] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let mad = if x.len() > 1 {
        x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    [mean, var.sqrt(), min, max, rms, mad]
}

/// Feature names in column order, e.g. `ch410_mean`.
pub fn feature_names(map: &ChannelMap) -> Vec<String> {
    (0..NUM_CHANNELS)
        .flat_map(|c| {
            let ch = map.column_name(c);
            STAT_NAMES.iter().map(move |s| format!("{ch}_{s}"))
        })
        .collect()
}

/// Nominal sample rate from the mean sampling interval.
pub fn nominal_rate_hz(series: &AbsorbanceSeries) -> Option<f64> {
    let ts = series.timestamps_ms();
    if ts.len() < 2 {
        return None;
    }
    let span = (ts[ts.len() - 1] - ts[0]) as f64;
    Some((ts.len() - 1) as f64 * 1000.0 / span)
}

/// One feature vector per window position; partial trailing windows are
/// dropped.
pub fn extract_features(
    series: &AbsorbanceSeries,
    spec: &WindowSpec,
) -> Result<Vec<FeatureVector>, FeatureError> {
    spec.validate()?;
    let rate = nominal_rate_hz(series).ok_or(FeatureError::TooShort {
        len: series.len(),
        window: 2,
    })?;
    let (window, stride) = spec.samples(rate)?;
    extract_features_samples(series, window, stride)
}

/// As [`extract_features`] with the window given in samples.
pub fn extract_features_samples(
    series: &AbsorbanceSeries,
    window: usize,
    stride: usize,
) -> Result<Vec<FeatureVector>, FeatureError> {
    let count = window_count(series.len(), window, stride);
    if count == 0 {
        return Err(FeatureError::TooShort {
            len: series.len(),
            window,
        });
    }
    let columns: Vec<Vec<f64>> = (0..NUM_CHANNELS).map(|c| series.channel(c)).collect();
    let ts = series.timestamps_ms();
    let out = (0..count)
        .map(|w| {
            let start = w * stride;
            let mut values = Vec::with_capacity(FEATURE_DIM);
            for col in &columns {
                values.extend_from_slice(&window_stats(&col[start..start + window]));
            }
            FeatureVector {
                values,
                window_start_ms: ts[start],
                window_end_ms: ts[start + window - 1],
            }
        })
        .collect();
    Ok(out)
}

/// Feature matrix with per-row labels and subject ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<HydrationLabel>,
    pub subject_ids: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<HydrationLabel>,
        subject_ids: Vec<u32>,
    ) -> Result<Self, FeatureError> {
        if rows.len() != labels.len() || rows.len() != subject_ids.len() {
            return Err(FeatureError::Dataset(format!(
                "{} rows, {} labels, {} subject ids",
                rows.len(),
                labels.len(),
                subject_ids.len()
            )));
        }
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(FeatureError::Dataset("ragged feature rows".into()));
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FeatureError::Dataset("non-finite feature value".into()));
        }
        Ok(Self {
            rows,
            labels,
            subject_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: indices.iter().map(|&i| self.subject_ids[i]).collect(),
        }
    }

    /// Distinct subject ids in ascending order.
    pub fn subjects(&self) -> Vec<u32> {
        let mut s = self.subject_ids.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for l in &self.labels {
            counts[l.code() as usize] += 1;
        }
        counts
    }

    fn push(&mut self, row: Vec<f64>, label: HydrationLabel, subject: u32) {
        self.rows.push(row);
        self.labels.push(label);
        self.subject_ids.push(subject);
    }

    /// `subject,label,<feature names>` with one row per window.
    pub fn write_csv<W: Write>(&self, writer: W, names: &[String]) -> Result<(), FeatureError> {
        if !self.is_empty() && names.len() != self.n_features() {
            return Err(FeatureError::Dataset(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features()
            )));
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["subject".to_string(), "label".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for ((row, label), subject) in self.rows.iter().zip(&self.labels).zip(&self.subject_ids) {
            let mut rec = vec![subject.to_string(), label.code().to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "subject" || &header[1] != "label" {
            return Err(FeatureError::Dataset(
                "header must start with subject,label and name at least one feature".into(),
            ));
        }
        let mut ds = LabeledDataset::default();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| FeatureError::Dataset(format!("row {}: bad {what}", line + 1));
            let subject: u32 = rec[0].trim().parse().map_err(|_| bad("subject"))?;
            let code: u8 = rec[1].trim().parse().map_err(|_| bad("label"))?;
            let label = HydrationLabel::from_code(code).ok_or_else(|| bad("label"))?;
            let row = rec
                .iter()
                .skip(2)
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("feature value"))?;
            ds.push(row, label, subject);
        }
        LabeledDataset::new(ds.rows, ds.labels, ds.subject_ids)
    }
}

/// One labeled recording from one subject.
#[derive(Debug, Clone)]
pub struct Recording {
    pub series: AbsorbanceSeries,
    pub label: HydrationLabel,
    pub subject_id: u32,
}

/// Concatenates window features from every recording. Recordings too short
/// for a single window are skipped; the skip count is returned.
pub fn build_dataset(
    recordings: &[Recording],
    spec: &WindowSpec,
) -> Result<(LabeledDataset, usize), FeatureError> {
    spec.validate()?;
    let mut ds = LabeledDataset::default();
    let mut skipped = 0;
    for rec in recordings {
        match extract_features(&rec.series, spec) {
            Ok(vectors) => {
                for v in vectors {
                    ds.push(v.values, rec.label, rec.subject_id);
                }
            }
            Err(FeatureError::TooShort { len, window }) => {
                log::warn!(
                    "skipping recording of subject {} ({len} samples < window {window})",
                    rec.subject_id
                );
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((ds, skipped))
}
