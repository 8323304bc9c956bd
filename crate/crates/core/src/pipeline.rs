//! Frames to labeled feature rows: absorbance, magnification, windowing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{eulerian_magnify, eulerian_magnify_causal, resample_uniform, DspError, EvmParams};
use crate::features::{extract_features, FeatureError, FeatureVector, LabeledDataset, WindowSpec};
use crate::spectra::{
    absorbance_series, AbsorbanceSeries, CalibrationProfile, ChannelMap, HydrationLabel,
    SpectraError, SpectralFrame,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("no calibration profile for subject {0}")]
    MissingProfile(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnification {
    Off,
    /// Forward-backward band-pass; the offline training path.
    #[default]
    ZeroPhase,
    /// Single forward pass, as run on the device.
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub magnification: Magnification,
    pub evm: EvmParams,
    pub window: WindowSpec,
    /// Resample onto a uniform grid before filtering.
    pub resample_hz: Option<f64>,
}

/// One subject's raw intensity stream for a single hydration state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecording {
    pub subject_id: u32,
    pub label: HydrationLabel,
    pub frames: Vec<SpectralFrame>,
}

/// Resampling and magnification of an absorbance series.
pub fn preprocess(
    series: &AbsorbanceSeries,
    config: &PipelineConfig,
) -> Result<AbsorbanceSeries, PipelineError> {
    let resampled;
    let series = match config.resample_hz {
        Some(hz) => {
            resampled = resample_uniform(series, hz)?;
            &resampled
        }
        None => series,
    };
    Ok(match config.magnification {
        Magnification::Off => series.clone(),
        Magnification::ZeroPhase => eulerian_magnify(series, &config.evm)?,
        Magnification::Causal => eulerian_magnify_causal(series, &config.evm)?,
    })
}

pub fn recording_features(
    frames: &[SpectralFrame],
    profile: &CalibrationProfile,
    config: &PipelineConfig,
) -> Result<Vec<FeatureVector>, PipelineError> {
    let series = absorbance_series(frames, profile, ChannelMap::default())?;
    let processed = preprocess(&series, config)?;
    Ok(extract_features(&processed, &config.window)?)
}

fn is_too_short(e: &PipelineError) -> bool {
    matches!(
        e,
        PipelineError::Dsp(DspError::TooShort { .. }) | PipelineError::Feature(FeatureError::TooShort { .. })
    )
}

/// Runs every recording through the pipeline and stacks the feature rows in
/// input order. Recordings too short to filter or window are skipped and
/// counted.
pub fn build_dataset_from_frames(
    recordings: &[RawRecording],
    profiles: &BTreeMap<u32, CalibrationProfile>,
    config: &PipelineConfig,
) -> Result<(LabeledDataset, usize), PipelineError> {
    let run = |rec: &RawRecording| {
        let profile = profiles
            .get(&rec.subject_id)
            .ok_or(PipelineError::MissingProfile(rec.subject_id))?;
        recording_features(&rec.frames, profile, config)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Vec<FeatureVector>, PipelineError>> = {
        use rayon::prelude::*;
        recordings.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Vec<FeatureVector>, PipelineError>> = recordings.iter().map(run).collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut subjects = Vec::new();
    let mut skipped = 0;
    for (rec, result) in recordings.iter().zip(results) {
        match result {
            Ok(vectors) => {
                for v in vectors {
                    rows.push(v.values);
                    labels.push(rec.label);
                    subjects.push(rec.subject_id);
                }
            }
            Err(e) if is_too_short(&e) => {
                log::warn!("skipping recording of subject {}: {e}", rec.subject_id);
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let ds = LabeledDataset::new(rows, labels, subjects)
        .map_err(PipelineError::Feature)?;
    Ok((ds, skipped))
}
