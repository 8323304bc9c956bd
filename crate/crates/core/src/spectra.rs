//! Spectral domain types, absorbance and per-channel gain calibration.
//!
//! A reading from the 18-channel sensor is a [`SpectralFrame`] of transmitted
//! intensities `I`. Together with a [`CalibrationProfile`] holding the incident
//! intensities `I0` and per-channel gains it yields base-10 absorbance
//! `A = log10(I0 / (g * I))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of wavelength channels on the sensor.
pub const NUM_CHANNELS: usize = 18;

/// One value per wavelength channel.
pub type ChannelValues = [f64; NUM_CHANNELS];

/// Nominal AS7265x channel centres in nanometres.
pub const DEFAULT_WAVELENGTHS_NM: ChannelValues = [
    410.0, 435.0, 460.0, 485.0, 510.0, 535.0, 560.0, 585.0, 610.0, 645.0, 680.0, 705.0, 730.0,
    760.0, 810.0, 860.0, 900.0, 940.0,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("channel {channel} has non-positive corrected intensity {value}")]
    ZeroIntensity { channel: usize, value: f64 },
    #[error("channel {channel} has invalid intensity {value}")]
    InvalidIntensity { channel: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("reference contains non-finite values")]
    DegenerateReference,
    #[error("invalid calibration profile: {0}")]
    InvalidProfile(String),
    #[error("invalid channel map: {0}")]
    InvalidChannelMap(String),
    #[error("timestamps must be strictly increasing (index {index})")]
    NonIncreasingTimestamps { index: usize },
    #[error("series has no samples")]
    EmptySeries,
    #[error("parse error: {0}")]
    Parse(String),
}

/// One timestamped raw intensity reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFrame {
    pub timestamp_ms: i64,
    pub channels: ChannelValues,
}

impl SpectralFrame {
    /// Builds a frame, checking that every channel is finite and non-negative.
    pub fn new(timestamp_ms: i64, channels: ChannelValues) -> Result<Self, SpectraError> {
        for (channel, &value) in channels.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(SpectraError::InvalidIntensity { channel, value });
            }
        }
        Ok(Self {
            timestamp_ms,
            channels,
        })
    }
}

/// Wavelength of each channel, strictly increasing from 410 to 940 nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelMap", into = "RawChannelMap")]
pub struct ChannelMap {
    wavelengths_nm: ChannelValues,
}

#[derive(Serialize, Deserialize)]
struct RawChannelMap {
    wavelengths_nm: ChannelValues,
}

impl TryFrom<RawChannelMap> for ChannelMap {
    type Error = SpectraError;

    fn try_from(raw: RawChannelMap) -> Result<Self, Self::Error> {
        ChannelMap::new(raw.wavelengths_nm)
    }
}

impl From<ChannelMap> for RawChannelMap {
    fn from(map: ChannelMap) -> Self {
        RawChannelMap {
            wavelengths_nm: map.wavelengths_nm,
        }
    }
}

impl ChannelMap {
    pub fn new(wavelengths_nm: ChannelValues) -> Result<Self, SpectraError> {
        if wavelengths_nm[0] != 410.0 || wavelengths_nm[NUM_CHANNELS - 1] != 940.0 {
            return Err(SpectraError::InvalidChannelMap(
                "first wavelength must be 410 nm and last 940 nm".into(),
            ));
        }
        if wavelengths_nm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectraError::InvalidChannelMap(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        Ok(Self { wavelengths_nm })
    }

    pub fn wavelengths_nm(&self) -> &ChannelValues {
        &self.wavelengths_nm
    }

    /// Column name used in CSV headers, e.g. `ch410`.
    pub fn column_name(&self, channel: usize) -> String {
        format!("ch{}", fmt_wavelength(self.wavelengths_nm[channel]))
    }
}

impl Default for ChannelMap {
    fn default() -> Self {
        Self {
            wavelengths_nm: DEFAULT_WAVELENGTHS_NM,
        }
    }
}

fn fmt_wavelength(nm: f64) -> String {
    if nm.fract() == 0.0 {
        format!("{}", nm as i64)
    } else {
        format!("{nm}")
    }
}

/// Incident intensities and per-channel multiplicative gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct CalibrationProfile {
    i0: ChannelValues,
    gains: ChannelValues,
    created_at_ms: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    i0: ChannelValues,
    gains: ChannelValues,
    created_at_ms: i64,
}

impl TryFrom<RawProfile> for CalibrationProfile {
    type Error = SpectraError;

    fn try_from(raw: RawProfile) -> Result<Self, Self::Error> {
        CalibrationProfile::new(raw.i0, raw.gains, raw.created_at_ms)
    }
}

impl From<CalibrationProfile> for RawProfile {
    fn from(p: CalibrationProfile) -> Self {
        RawProfile {
            i0: p.i0,
            gains: p.gains,
            created_at_ms: p.created_at_ms,
        }
    }
}

impl CalibrationProfile {
    pub fn new(
        i0: ChannelValues,
        gains: ChannelValues,
        created_at_ms: i64,
    ) -> Result<Self, SpectraError> {
        if let Some(c) = i0.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SpectraError::InvalidProfile(format!(
                "i0[{c}] = {} is not positive",
                i0[c]
            )));
        }
        if let Some(c) = gains.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SpectraError::InvalidProfile(format!(
                "gains[{c}] = {} is not positive",
                gains[c]
            )));
        }
        Ok(Self {
            i0,
            gains,
            created_at_ms,
        })
    }

    /// Profile with unit gains.
    pub fn from_i0(i0: ChannelValues, created_at_ms: i64) -> Result<Self, SpectraError> {
        Self::new(i0, [1.0; NUM_CHANNELS], created_at_ms)
    }

    pub fn i0(&self) -> &ChannelValues {
        &self.i0
    }

    pub fn gains(&self) -> &ChannelValues {
        &self.gains
    }

    pub fn created_at_ms(&self) -> i64 {
        self.created_at_ms
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profile serializes")
    }
}

/// Calibrated absorbance time series (T rows by 18 channels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbanceSeries {
    timestamps_ms: Vec<i64>,
    values: Vec<ChannelValues>,
    channel_map: ChannelMap,
}

impl AbsorbanceSeries {
    pub fn new(
        timestamps_ms: Vec<i64>,
        values: Vec<ChannelValues>,
        channel_map: ChannelMap,
    ) -> Result<Self, SpectraError> {
        if timestamps_ms.len() != values.len() {
            return Err(SpectraError::ShapeMismatch(format!(
                "{} timestamps but {} rows",
                timestamps_ms.len(),
                values.len()
            )));
        }
        if let Some(i) = timestamps_ms.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SpectraError::NonIncreasingTimestamps { index: i + 1 });
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SpectraError::ShapeMismatch("non-finite absorbance".into()));
        }
        Ok(Self {
            timestamps_ms,
            values,
            channel_map,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps_ms(&self) -> &[i64] {
        &self.timestamps_ms
    }

    pub fn values(&self) -> &[ChannelValues] {
        &self.values
    }

    pub fn channel_map(&self) -> &ChannelMap {
        &self.channel_map
    }

    /// Column `channel` as an owned vector.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[channel]).collect()
    }

    /// Rebuilds a series from per-channel columns, keeping timestamps and map.
    pub(crate) fn with_columns(&self, columns: &[Vec<f64>]) -> Self {
        let mut values = vec![[0.0; NUM_CHANNELS]; self.len()];
        for (c, col) in columns.iter().enumerate() {
            for (row, v) in values.iter_mut().zip(col) {
                row[c] = *v;
            }
        }
        Self {
            timestamps_ms: self.timestamps_ms.clone(),
            values,
            channel_map: self.channel_map,
        }
    }

    /// Per-channel mean over all rows.
    pub fn channel_means(&self) -> ChannelValues {
        let mut out = [0.0; NUM_CHANNELS];
        for row in &self.values {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let n = self.len() as f64;
        out.map(|s| s / n)
    }
}

/// Hydration state, with stable integer codes 0/1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum HydrationLabel {
    FullyHydrated = 0,
    MidHydrated = 1,
    Dehydrated = 2,
}

impl HydrationLabel {
    pub const ALL: [HydrationLabel; 3] = [
        HydrationLabel::FullyHydrated,
        HydrationLabel::MidHydrated,
        HydrationLabel::Dehydrated,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            HydrationLabel::FullyHydrated => "Fully Hydrated",
            HydrationLabel::MidHydrated => "Mid-Hydrated",
            HydrationLabel::Dehydrated => "Dehydrated",
        }
    }
}

impl From<HydrationLabel> for u8 {
    fn from(label: HydrationLabel) -> u8 {
        label.code()
    }
}

impl TryFrom<u8> for HydrationLabel {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        HydrationLabel::from_code(code).ok_or_else(|| format!("invalid label code {code}"))
    }
}

impl std::fmt::Display for HydrationLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Multiplies every channel by its gain.
pub fn apply_gains(frame: &SpectralFrame, profile: &CalibrationProfile) -> SpectralFrame {
    let mut channels = frame.channels;
    for (v, g) in channels.iter_mut().zip(&profile.gains) {
        *v *= g;
    }
    SpectralFrame {
        timestamp_ms: frame.timestamp_ms,
        channels,
    }
}

/// `A[c] = log10(i0[c] / (gains[c] * I[c]))`. Rejects frames whose corrected
/// intensity is not strictly positive.
pub fn compute_absorbance(
    frame: &SpectralFrame,
    profile: &CalibrationProfile,
) -> Result<ChannelValues, SpectraError> {
    let corrected = apply_gains(frame, profile);
    let mut out = [0.0; NUM_CHANNELS];
    for c in 0..NUM_CHANNELS {
        let i = corrected.channels[c];
        if !(i > 0.0) || !i.is_finite() {
            return Err(SpectraError::ZeroIntensity { channel: c, value: i });
        }
        out[c] = (profile.i0[c] / i).log10();
    }
    Ok(out)
}

/// Converts a frame sequence into an absorbance series.
pub fn absorbance_series(
    frames: &[SpectralFrame],
    profile: &CalibrationProfile,
    channel_map: ChannelMap,
) -> Result<AbsorbanceSeries, SpectraError> {
    let values = frames
        .iter()
        .map(|f| compute_absorbance(f, profile))
        .collect::<Result<Vec<_>, _>>()?;
    let timestamps = frames.iter().map(|f| f.timestamp_ms).collect();
    AbsorbanceSeries::new(timestamps, values, channel_map)
}

/// High-resolution reference spectrum from a laboratory instrument, sampled
/// at arbitrary increasing wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpectrum {
    pub timestamps_ms: Vec<i64>,
    pub wavelengths_nm: Vec<f64>,
    /// One row per timestamp, one column per wavelength.
    pub absorbance: Vec<Vec<f64>>,
}

impl ReferenceSpectrum {
    /// Linearly interpolates every row onto the channel wavelengths.
    pub fn resample(&self, channel_map: &ChannelMap) -> Result<AbsorbanceSeries, SpectraError> {
        let wl = &self.wavelengths_nm;
        if wl.len() < 2 {
            return Err(SpectraError::ShapeMismatch(
                "reference needs at least two wavelengths".into(),
            ));
        }
        if wl.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectraError::ShapeMismatch(
                "reference wavelengths must be strictly increasing".into(),
            ));
        }
        if self.absorbance.len() != self.timestamps_ms.len() {
            return Err(SpectraError::ShapeMismatch(
                "reference row count differs from timestamp count".into(),
            ));
        }
        let targets = channel_map.wavelengths_nm();
        if targets[0] < wl[0] || targets[NUM_CHANNELS - 1] > wl[wl.len() - 1] {
            return Err(SpectraError::ShapeMismatch(
                "reference does not cover the channel wavelength range".into(),
            ));
        }
        let mut rows = Vec::with_capacity(self.absorbance.len());
        for row in &self.absorbance {
            if row.len() != wl.len() {
                return Err(SpectraError::ShapeMismatch(format!(
                    "reference row has {} values for {} wavelengths",
                    row.len(),
                    wl.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(SpectraError::DegenerateReference);
            }
            let mut out = [0.0; NUM_CHANNELS];
            for (o, &t) in out.iter_mut().zip(targets) {
                // first index with wl[j] >= t
                let j = wl.partition_point(|&w| w < t);
                *o = if wl[j] == t {
                    row[j]
                } else {
                    let (w0, w1) = (wl[j - 1], wl[j]);
                    let frac = (t - w0) / (w1 - w0);
                    row[j - 1] + frac * (row[j] - row[j - 1])
                };
            }
            rows.push(out);
        }
        AbsorbanceSeries::new(self.timestamps_ms.clone(), rows, *channel_map)
    }
}

/// Fits per-channel gains so that gain-corrected `measured` absorbance matches
/// `reference` in the least-squares sense.
///
/// A gain `g` multiplies the transmitted intensity and so shifts absorbance
/// by `-log10 g`; the per-channel optimum is
/// `log10 g[c] = mean(A_measured[c]) - mean(A_reference[c])`.
/// The returned profile carries the supplied `i0`.
pub fn fit_channel_gains(
    measured: &AbsorbanceSeries,
    reference: &AbsorbanceSeries,
    i0: &ChannelValues,
    created_at_ms: i64,
) -> Result<CalibrationProfile, SpectraError> {
    if measured.is_empty() || reference.is_empty() {
        return Err(SpectraError::EmptySeries);
    }
    if reference.values().iter().flatten().any(|v| !v.is_finite()) {
        return Err(SpectraError::DegenerateReference);
    }
    let m = measured.channel_means();
    let r = reference.channel_means();
    let mut gains = [1.0; NUM_CHANNELS];
    for c in 0..NUM_CHANNELS {
        gains[c] = 10f64.powf(m[c] - r[c]);
    }
    CalibrationProfile::new(*i0, gains, created_at_ms)
}

/// Per-channel mean residual `A_measured - log10 g - A_reference` after fitting.
pub fn gain_residuals(
    measured: &AbsorbanceSeries,
    reference: &AbsorbanceSeries,
    profile: &CalibrationProfile,
) -> ChannelValues {
    let m = measured.channel_means();
    let r = reference.channel_means();
    let mut out = [0.0; NUM_CHANNELS];
    for c in 0..NUM_CHANNELS {
        out[c] = m[c] - profile.gains[c].log10() - r[c];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(i0: f64, gain: f64) -> CalibrationProfile {
        CalibrationProfile::new([i0; NUM_CHANNELS], [gain; NUM_CHANNELS], 0).unwrap()
    }

    fn series(rows: Vec<ChannelValues>) -> AbsorbanceSeries {
        let ts = (0..rows.len() as i64).map(|i| i * 1000).collect();
        AbsorbanceSeries::new(ts, rows, ChannelMap::default()).unwrap()
    }

    #[test]
    fn identity_absorbance_is_exactly_zero() {
        let p = CalibrationProfile::new(
            std::array::from_fn(|c| 100.0 + c as f64 * 17.3),
            [1.0; NUM_CHANNELS],
            0,
        )
        .unwrap();
        let frame = SpectralFrame::new(0, *p.i0()).unwrap();
        assert_eq!(compute_absorbance(&frame, &p).unwrap(), [0.0; NUM_CHANNELS]);
    }

    #[test]
    fn decade_attenuation_gives_unit_absorbance() {
        let p = profile(500.0, 1.0);
        let frame = SpectralFrame::new(0, [50.0; NUM_CHANNELS]).unwrap();
        for a in compute_absorbance(&frame, &p).unwrap() {
            assert!((a - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn half_intensity_matches_log10_two() {
        // log10(2) = ln 2 / ln 10, evaluated from series independent of f64::log10
        let ln2: f64 = (1..200).map(|k| 1.0 / (k as f64 * 2f64.powi(k))).sum();
        // ln 10 = 3 ln 2 + ln 1.25 = 3 ln 2 - ln 0.8
        let ln10 = 3.0 * ln2 + (1..200).map(|k| 0.2f64.powi(k) / k as f64).sum::<f64>();
        let expected = ln2 / ln10;
        assert!((expected - 0.301_029_995_663_981_2).abs() < 1e-15);

        let p = profile(800.0, 1.0);
        let mut ch = [800.0; NUM_CHANNELS];
        ch[0] = 400.0;
        let a = compute_absorbance(&SpectralFrame::new(0, ch).unwrap(), &p).unwrap();
        assert!((a[0] - expected).abs() < 1e-15);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn zero_intensity_is_rejected() {
        let p = profile(100.0, 1.0);
        let mut ch = [10.0; NUM_CHANNELS];
        ch[7] = 0.0;
        let err = compute_absorbance(&SpectralFrame::new(0, ch).unwrap(), &p).unwrap_err();
        assert_eq!(err, SpectraError::ZeroIntensity { channel: 7, value: 0.0 });
    }

    #[test]
    fn frame_rejects_negative_and_nan() {
        let mut ch = [1.0; NUM_CHANNELS];
        ch[3] = -1.0;
        assert!(SpectralFrame::new(0, ch).is_err());
        ch[3] = f64::NAN;
        assert!(SpectralFrame::new(0, ch).is_err());
    }

    #[test]
    fn apply_gains_examples() {
        let frame = SpectralFrame::new(42, std::array::from_fn(|c| c as f64 + 3.0)).unwrap();
        assert_eq!(apply_gains(&frame, &profile(1.0, 1.0)), frame);
        let doubled = apply_gains(&frame, &profile(1.0, 2.0));
        assert_eq!(doubled.timestamp_ms, 42);
        for c in 0..NUM_CHANNELS {
            assert_eq!(doubled.channels[c], 2.0 * frame.channels[c]);
        }
        let mut gains = [1.0; NUM_CHANNELS];
        gains[0] = 2.0;
        let p = CalibrationProfile::new([1.0; NUM_CHANNELS], gains, 0).unwrap();
        let out = apply_gains(&frame, &p);
        assert_eq!(out.channels[0], 6.0);
        assert_eq!(out.channels[1], 4.0);
    }

    #[test]
    fn profile_validation() {
        let mut bad = [1.0; NUM_CHANNELS];
        bad[2] = 0.0;
        assert!(CalibrationProfile::new(bad, [1.0; NUM_CHANNELS], 0).is_err());
        assert!(CalibrationProfile::new([1.0; NUM_CHANNELS], bad, 0).is_err());
        bad[2] = f64::INFINITY;
        assert!(CalibrationProfile::new([1.0; NUM_CHANNELS], bad, 0).is_err());
    }

    #[test]
    fn profile_json_shape() {
        let p = profile(2.0, 1.5);
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 3);
        assert_eq!(obj["i0"].as_array().unwrap().len(), 18);
        assert_eq!(obj["gains"].as_array().unwrap().len(), 18);
        assert_eq!(obj["created_at_ms"], 0);
        let back: CalibrationProfile = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(back, p);
        let bad = p.to_json().replace("1.5", "-1.5");
        assert!(serde_json::from_str::<CalibrationProfile>(&bad).is_err());
    }

    #[test]
    fn channel_map_rules() {
        let map = ChannelMap::default();
        assert_eq!(map.column_name(0), "ch410");
        assert_eq!(map.column_name(17), "ch940");
        let mut wl = DEFAULT_WAVELENGTHS_NM;
        wl[5] = wl[4];
        assert!(ChannelMap::new(wl).is_err());
        let mut wl = DEFAULT_WAVELENGTHS_NM;
        wl[0] = 400.0;
        assert!(ChannelMap::new(wl).is_err());
    }

    #[test]
    fn label_codes_are_stable() {
        for (i, l) in HydrationLabel::ALL.iter().enumerate() {
            assert_eq!(l.code() as usize, i);
            assert_eq!(HydrationLabel::from_code(i as u8), Some(*l));
        }
        assert_eq!(HydrationLabel::from_code(3), None);
        assert_eq!(serde_json::to_string(&HydrationLabel::Dehydrated).unwrap(), "2");
    }

    #[test]
    fn fit_gains_identity() {
        let rows: Vec<ChannelValues> = (0..5)
            .map(|t| std::array::from_fn(|c| 0.1 * c as f64 + 0.01 * t as f64))
            .collect();
        let s = series(rows);
        let p = fit_channel_gains(&s, &s, &[1.0; NUM_CHANNELS], 0).unwrap();
        for g in p.gains() {
            assert!((g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_gains_constant_offset() {
        let reference = series(vec![[0.2; NUM_CHANNELS]; 3]);
        let mut shifted = [0.2; NUM_CHANNELS];
        shifted[4] = 0.7;
        let measured = series(vec![shifted; 3]);
        let p = fit_channel_gains(&measured, &reference, &[1.0; NUM_CHANNELS], 0).unwrap();
        // 10^0.5 by hand: 3.16227766016838
        assert!((p.gains()[4] - 3.162_277_660_168_38).abs() < 1e-12);
        assert!((p.gains()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_gains_mean_of_offsets() {
        let reference = series(vec![[0.0; NUM_CHANNELS]; 2]);
        let mut r0 = [0.0; NUM_CHANNELS];
        let mut r1 = [0.0; NUM_CHANNELS];
        r0[9] = 0.2;
        r1[9] = 0.4;
        let measured = series(vec![r0, r1]);
        let p = fit_channel_gains(&measured, &reference, &[1.0; NUM_CHANNELS], 0).unwrap();
        assert!((p.gains()[9].log10() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn fit_gains_rejects_non_finite_reference() {
        let mut reference = series(vec![[0.0; NUM_CHANNELS]; 2]);
        reference.values[1][3] = f64::NAN;
        let measured = series(vec![[0.0; NUM_CHANNELS]; 2]);
        assert_eq!(
            fit_channel_gains(&measured, &reference, &[1.0; NUM_CHANNELS], 0).unwrap_err(),
            SpectraError::DegenerateReference
        );
    }

    #[test]
    fn reference_resampling_interpolates_linearly() {
        let wavelengths: Vec<f64> = (0..=53).map(|k| 410.0 + 10.0 * k as f64).collect();
        let row: Vec<f64> = wavelengths.iter().map(|w| 0.001 * w + 0.5).collect();
        let spectrum = ReferenceSpectrum {
            timestamps_ms: vec![0],
            wavelengths_nm: wavelengths,
            absorbance: vec![row],
        };
        let s = spectrum.resample(&ChannelMap::default()).unwrap();
        for (c, wl) in DEFAULT_WAVELENGTHS_NM.iter().enumerate() {
            assert!((s.values()[0][c] - (0.001 * wl + 0.5)).abs() < 1e-12);
        }
        let short = ReferenceSpectrum {
            timestamps_ms: vec![0],
            wavelengths_nm: vec![500.0, 600.0],
            absorbance: vec![vec![0.0, 0.0]],
        };
        assert!(matches!(
            short.resample(&ChannelMap::default()),
            Err(SpectraError::ShapeMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn gain_absorbance_duality(i in 1e-3f64..1e4, i0 in 1e-3f64..1e4, g in 1e-2f64..1e2) {
            let frame = SpectralFrame::new(0, [i; NUM_CHANNELS]).unwrap();
            let unit = compute_absorbance(&frame, &profile(i0, 1.0)).unwrap();
            let gained = compute_absorbance(&frame, &profile(i0, g)).unwrap();
            for c in 0..NUM_CHANNELS {
                prop_assert!((gained[c] - (unit[c] - g.log10())).abs() < 1e-12);
            }
        }

        #[test]
        fn absorbance_is_monotone_per_channel(i in 1.0f64..1e4, drop in 1e-6f64..0.99, c in 0usize..NUM_CHANNELS) {
            let p = profile(5000.0, 1.0);
            let base = SpectralFrame::new(0, [i; NUM_CHANNELS]).unwrap();
            let mut lower = base;
            lower.channels[c] *= 1.0 - drop;
            let a = compute_absorbance(&base, &p).unwrap();
            let b = compute_absorbance(&lower, &p).unwrap();
            for k in 0..NUM_CHANNELS {
                if k == c { prop_assert!(b[k] > a[k]); } else { prop_assert_eq!(b[k], a[k]); }
            }
        }

        #[test]
        fn gain_fit_exact_for_constant_offsets(offsets in proptest::array::uniform18(-1.0f64..1.0), n in 1usize..6) {
            let rows: Vec<ChannelValues> = (0..n).map(|t| std::array::from_fn(|c| 0.3 + 0.05 * (t * c) as f64)).collect();
            let reference = series(rows.clone());
            let measured = series(rows.iter().map(|r| std::array::from_fn(|c| r[c] + offsets[c])).collect());
            let p = fit_channel_gains(&measured, &reference, &[1.0; NUM_CHANNELS], 0).unwrap();
            for r in gain_residuals(&measured, &reference, &p) {
                prop_assert!(r.abs() < 1e-12);
            }
        }
    }
}
