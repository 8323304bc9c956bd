//! Butterworth band-pass design and Eulerian temporal magnification.
//!
//! Each spectral channel is treated as a single "pixel": magnification is
//! `y = x + alpha * bandpass(x)` applied independently per channel.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::{AbsorbanceSeries, NUM_CHANNELS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("signal of length {len} is too short (needs more than {min})")]
    TooShort { len: usize, min: usize },
    #[error("sampling is not uniform at {rate_hz} Hz: interval {interval_ms} ms at index {index}")]
    NonUniformSampling {
        rate_hz: f64,
        interval_ms: i64,
        index: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Passband edges, sample rate and total band-pass order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate_hz: f64,
    pub order: u32,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self {
            low_hz: 0.01,
            high_hz: 0.2,
            sample_rate_hz: 1.0,
            order: 2,
        }
    }
}

impl BandSpec {
    pub fn validate(&self) -> Result<(), DspError> {
        let BandSpec {
            low_hz,
            high_hz,
            sample_rate_hz,
            order,
        } = *self;
        if ![low_hz, high_hz, sample_rate_hz].iter().all(|v| v.is_finite()) {
            return Err(DspError::InvalidBand("non-finite frequency".into()));
        }
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate_hz / 2.0) {
            return Err(DspError::InvalidBand(format!(
                "need 0 < low ({low_hz}) < high ({high_hz}) < fs/2 ({})",
                sample_rate_hz / 2.0
            )));
        }
        if !matches!(order, 2 | 4 | 6 | 8) {
            return Err(DspError::InvalidBand(format!(
                "order {order} not in {{2, 4, 6, 8}}"
            )));
        }
        Ok(())
    }

    /// Digital frequency (Hz) of the passband peak: the geometric centre of
    /// the pre-warped edges mapped back through the bilinear transform.
    pub fn center_hz(&self) -> f64 {
        let fs = self.sample_rate_hz;
        let t1 = (PI * self.low_hz / fs).tan();
        let t2 = (PI * self.high_hz / fs).tan();
        (t1 * t2).sqrt().atan() * fs / PI
    }
}

/// One second-order section with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + self.b1 * z_inv + self.b2 * z2) / (1.0 + self.a1 * z_inv + self.a2 * z2)
    }

    /// Transposed direct-form II state that a constant unit input settles to.
    fn unit_step_state(&self) -> [f64; 2] {
        let dc = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let s2 = self.b2 - self.a2 * dc;
        let s1 = self.b1 - self.a1 * dc + s2;
        [s1, s2]
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    #[inline]
    pub fn tick(&self, state: &mut [f64; 2], x: f64) -> f64 {
        let y = self.b0 * x + state[0];
        state[0] = self.b1 * x - self.a1 * y + state[1];
        state[1] = self.b2 * x - self.a2 * y;
        y
    }
}

/// Ordered cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
}

impl BiquadCascade {
    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        self.response(freq_hz, sample_rate_hz).norm()
    }

    /// Edge-padding length used by [`filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * 2 * self.sections.len()
    }

    /// Per-section steady-state for a constant input of `x0`.
    pub fn steady_state(&self, x0: f64) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let st = s.unit_step_state().map(|v| v * scale * x0);
                scale *= s.dc_gain();
                st
            })
            .collect()
    }

    /// Runs the cascade over `signal` in place starting from `state`.
    pub fn run(&self, state: &mut [[f64; 2]], signal: &mut [f64]) {
        for x in signal.iter_mut() {
            let mut v = *x;
            for (s, st) in self.sections.iter().zip(state.iter_mut()) {
                v = s.tick(st, v);
            }
            *x = v;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cascade serializes")
    }
}

/// Designs a digital Butterworth band-pass of total order `spec.order`.
///
/// Analog low-pass prototype of order `order / 2`, low-pass to band-pass
/// transform around pre-warped edges, then the bilinear transform. Every
/// section holds one zero at DC and one at Nyquist; each is scaled to unit
/// magnitude at the passband centre.
pub fn design_butterworth_bandpass(spec: &BandSpec) -> Result<BiquadCascade, DspError> {
    spec.validate()?;
    let n = (spec.order / 2) as usize;
    let fs = spec.sample_rate_hz;
    let k = 2.0 * fs;
    let w1 = k * (PI * spec.low_hz / fs).tan();
    let w2 = k * (PI * spec.high_hz / fs).tan();
    let bw = w2 - w1;
    let w0_sq = w1 * w2;

    // Prototype poles in the upper half plane (plus the real pole for odd n).
    let mut pole_pairs: Vec<(Complex64, Complex64)> = Vec::with_capacity(n);
    for i in 0..n {
        let theta = PI * (2 * i + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        if p.im < -1e-12 {
            continue;
        }
        let half = p * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        let (s1, s2) = (half + disc, half - disc);
        if p.im.abs() <= 1e-12 {
            // real prototype pole: its two band-pass poles form one section
            pole_pairs.push((s1, s2));
        } else {
            pole_pairs.push((s1, s1.conj()));
            pole_pairs.push((s2, s2.conj()));
        }
    }

    let bilinear = |s: Complex64| (k + s) / (k - s);
    let center = spec.center_hz();
    let z_inv_center = Complex64::from_polar(1.0, -2.0 * PI * center / fs);

    let sections = pole_pairs
        .into_iter()
        .map(|(sa, sb)| {
            let (za, zb) = (bilinear(sa), bilinear(sb));
            let a1 = -(za + zb).re;
            let a2 = (za * zb).re;
            let mut q = Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1,
                a2,
            };
            let g = 1.0 / q.response(z_inv_center).norm();
            q.b0 = g;
            q.b2 = -g;
            q
        })
        .collect();
    Ok(BiquadCascade { sections })
}

/// Causal single-pass filtering with the cascade state initialised to the
/// steady state of the first sample.
pub fn sosfilt_steady(cascade: &BiquadCascade, signal: &[f64]) -> Vec<f64> {
    let mut out = signal.to_vec();
    if let Some(&x0) = signal.first() {
        let mut state = cascade.steady_state(x0);
        cascade.run(&mut state, &mut out);
    }
    out
}

/// Zero-phase forward-backward filtering with odd-reflection padding.
pub fn filtfilt(cascade: &BiquadCascade, signal: &[f64]) -> Result<Vec<f64>, DspError> {
    let pad = cascade.pad_len();
    let min = 3 * pad;
    if signal.len() <= min {
        return Err(DspError::TooShort {
            len: signal.len(),
            min,
        });
    }
    let n = signal.len();
    let (first, last) = (signal[0], signal[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let mut state = cascade.steady_state(ext[0]);
    cascade.run(&mut state, &mut ext);
    ext.reverse();
    let mut state = cascade.steady_state(ext[0]);
    cascade.run(&mut state, &mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

/// Amplification factor and band for temporal magnification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvmParams {
    pub alpha: f64,
    pub band: BandSpec,
}

impl Default for EvmParams {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            band: BandSpec::default(),
        }
    }
}

impl EvmParams {
    pub fn validate(&self) -> Result<(), DspError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(DspError::InvalidParam(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        self.band.validate()
    }
}

/// Checks every sampling interval against `1000 / rate_hz` ms within 1%.
pub fn check_uniform(timestamps_ms: &[i64], rate_hz: f64) -> Result<(), DspError> {
    let nominal = 1000.0 / rate_hz;
    for (i, w) in timestamps_ms.windows(2).enumerate() {
        let dt = w[1] - w[0];
        if ((dt as f64 - nominal) / nominal).abs() > 0.01 {
            return Err(DspError::NonUniformSampling {
                rate_hz,
                interval_ms: dt,
                index: i + 1,
            });
        }
    }
    Ok(())
}

fn map_channels(
    series: &AbsorbanceSeries,
    f: impl Fn(&[f64]) -> Result<Vec<f64>, DspError> + Sync,
) -> Result<AbsorbanceSeries, DspError> {
    let columns: Vec<Vec<f64>> = (0..NUM_CHANNELS).map(|c| series.channel(c)).collect();
    #[cfg(feature = "parallel")]
    let mapped: Result<Vec<Vec<f64>>, DspError> = {
        use rayon::prelude::*;
        columns.par_iter().map(|c| f(c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mapped: Result<Vec<Vec<f64>>, DspError> = columns.iter().map(|c| f(c)).collect();
    Ok(series.with_columns(&mapped?))
}

/// Zero-phase band-pass of every channel.
pub fn bandpass_series(
    series: &AbsorbanceSeries,
    band: &BandSpec,
) -> Result<AbsorbanceSeries, DspError> {
    let cascade = design_butterworth_bandpass(band)?;
    map_channels(series, |x| filtfilt(&cascade, x))
}

/// `y = x + alpha * filtfilt(bandpass, x)` per channel.
pub fn eulerian_magnify(
    series: &AbsorbanceSeries,
    params: &EvmParams,
) -> Result<AbsorbanceSeries, DspError> {
    params.validate()?;
    if series.len() < 2 {
        return Err(DspError::TooShort {
            len: series.len(),
            min: 1,
        });
    }
    check_uniform(series.timestamps_ms(), params.band.sample_rate_hz)?;
    let cascade = design_butterworth_bandpass(&params.band)?;
    let alpha = params.alpha;
    map_channels(series, |x| {
        let band = filtfilt(&cascade, x)?;
        Ok(x.iter().zip(&band).map(|(v, b)| v + alpha * b).collect())
    })
}

/// Single-pass causal variant of [`eulerian_magnify`], matching the
/// streaming runtime: filter state starts at the first sample's steady state.
pub fn eulerian_magnify_causal(
    series: &AbsorbanceSeries,
    params: &EvmParams,
) -> Result<AbsorbanceSeries, DspError> {
    params.validate()?;
    check_uniform(series.timestamps_ms(), params.band.sample_rate_hz)?;
    let cascade = design_butterworth_bandpass(&params.band)?;
    let alpha = params.alpha;
    map_channels(series, |x| {
        let band = sosfilt_steady(&cascade, x);
        Ok(x.iter().zip(&band).map(|(v, b)| v + alpha * b).collect())
    })
}

/// Linear interpolation onto a uniform grid from the first to the last
/// timestamp at `target_hz`.
pub fn resample_uniform(
    series: &AbsorbanceSeries,
    target_hz: f64,
) -> Result<AbsorbanceSeries, DspError> {
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(DspError::InvalidParam(format!(
            "target rate must be positive, got {target_hz}"
        )));
    }
    if series.len() < 2 {
        return Err(DspError::TooShort {
            len: series.len(),
            min: 1,
        });
    }
    let ts = series.timestamps_ms();
    let t0 = ts[0] as f64;
    let span = (ts[ts.len() - 1] - ts[0]) as f64;
    let step = 1000.0 / target_hz;
    let count = (span / step + 1e-9).floor() as usize + 1;
    let values = series.values();

    let mut out_ts = Vec::with_capacity(count);
    let mut out_vals = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let t = t0 + k as f64 * step;
        while j + 2 < ts.len() && (ts[j + 1] as f64) < t {
            j += 1;
        }
        let (ta, tb) = (ts[j] as f64, ts[j + 1] as f64);
        let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        let mut row = [0.0; NUM_CHANNELS];
        for c in 0..NUM_CHANNELS {
            let (a, b) = (values[j][c], values[j + 1][c]);
            row[c] = if frac == 0.0 {
                a
            } else if frac == 1.0 {
                b
            } else {
                a + frac * (b - a)
            };
        }
        out_ts.push(t.round() as i64);
        out_vals.push(row);
    }
    AbsorbanceSeries::new(out_ts, out_vals, *series.channel_map())
        .map_err(|e| DspError::InvalidParam(e.to_string()))
}
