//! WebAssembly bindings for the browser demo. Only numbers, strings and
//! `Vec<f64>` cross the boundary, so the same functions run in native tests.

use std::f64::consts::PI;

use hydrotrack_core::dsp::{design_butterworth_bandpass, filtfilt, BandSpec};
use hydrotrack_core::spectra::DEFAULT_WAVELENGTHS_NM;
use hydrotrack_core::synth::{reference_grid, SolutionSpec};
use wasm_bindgen::prelude::*;

fn band(low_hz: f64, high_hz: f64, sample_rate_hz: f64, order: u32) -> BandSpec {
    BandSpec {
        low_hz,
        high_hz,
        sample_rate_hz,
        order,
    }
}

/// `|H(f)|` at `n_points` frequencies evenly spaced from 0 to Nyquist.
#[wasm_bindgen]
pub fn filter_response(
    low_hz: f64,
    high_hz: f64,
    sample_rate_hz: f64,
    order: u32,
    n_points: usize,
) -> Result<Vec<f64>, String> {
    let spec = band(low_hz, high_hz, sample_rate_hz, order);
    let cascade = design_butterworth_bandpass(&spec).map_err(|e| e.to_string())?;
    let n = n_points.max(2);
    Ok((0..n)
        .map(|i| {
            let f = 0.5 * sample_rate_hz * i as f64 / (n - 1) as f64;
            cascade.magnitude(f, sample_rate_hz)
        })
        .collect())
}

/// Geometric passband centre after pre-warping.
#[wasm_bindgen]
pub fn band_center_hz(low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> f64 {
    band(low_hz, high_hz, sample_rate_hz, 2).center_hz()
}

/// Magnifies a synthetic channel: a slow drift plus a small in-band tone.
/// Returns `[input; n] ++ [bandpass; n] ++ [magnified; n]`.
#[wasm_bindgen]
pub fn evm_demo(
    alpha: f64,
    low_hz: f64,
    high_hz: f64,
    order: u32,
    tone_hz: f64,
    tone_amplitude: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    let fs = 1.0;
    let cascade =
        design_butterworth_bandpass(&band(low_hz, high_hz, fs, order)).map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            0.8 + 0.05 * (2.0 * PI * 0.002 * t).sin() + tone_amplitude * (2.0 * PI * tone_hz * t).sin()
        })
        .collect();
    let bp = filtfilt(&cascade, &x).map_err(|e| e.to_string())?;
    let y: Vec<f64> = x.iter().zip(&bp).map(|(v, b)| v + alpha * b).collect();
    let mut out = x;
    out.extend(bp);
    out.extend(y);
    Ok(out)
}

/// Wavelength grid used by [`solution_spectrum`].
#[wasm_bindgen]
pub fn spectrum_wavelengths(resolution: usize) -> Vec<f64> {
    reference_grid(resolution.max(2))
}

/// Sensor channel centres in nanometres.
#[wasm_bindgen]
pub fn channel_wavelengths() -> Vec<f64> {
    DEFAULT_WAVELENGTHS_NM.to_vec()
}

/// Absorbance of the default solution at `concentration_mg`, on the grid of
/// [`spectrum_wavelengths`].
#[wasm_bindgen]
pub fn solution_spectrum(concentration_mg: f64, resolution: usize) -> Result<Vec<f64>, String> {
    let spec = SolutionSpec {
        concentration_mg,
        ..SolutionSpec::default()
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spectrum_wavelengths(resolution)
        .into_iter()
        .map(|w| spec.absorbance_at(w))
        .collect())
}
