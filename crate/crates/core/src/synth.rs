//! Synthetic data standing in for the sensor and the participants.
//!
//! Solutions follow Beer-Lambert: absorbance is a solvent baseline plus
//! concentration times a per-channel absorptivity profile. Participants add a
//! hydration-driven absorbance shift to a subject baseline; the shift carries
//! a slow in-band modulation whose depth grows with dehydration, and each
//! recording also picks up an out-of-band drift. Effect sizes are invented
//! and exist only to make the downstream properties testable.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::LabeledDataset;
use crate::pipeline::{build_dataset_from_frames, PipelineConfig, PipelineError, RawRecording};
use crate::seed::{derived_rng, sub_seed};
use crate::spectra::{
    absorbance_series, AbsorbanceSeries, CalibrationProfile, ChannelMap, ChannelValues,
    HydrationLabel, ReferenceSpectrum, SpectraError, SpectralFrame, DEFAULT_WAVELENGTHS_NM,
    NUM_CHANNELS,
};

const NOISE_STREAM: u64 = 0x0015E;
const PHASE_STREAM: u64 = 0x9A5E;
const SUBJECT_STREAM: u64 = 0x5B1EC7;

/// Draws of non-positive intensity are repeated at most this many times.
const MAX_REDRAWS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("noise produced a non-positive intensity on channel {channel}")]
    NonPositiveIntensity { channel: usize },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec(msg.into())
}

fn check_range(name: &str, r: [f64; 2]) -> Result<(), SynthError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(invalid(format!("{name} range {r:?} is not an ordered finite pair")));
    }
    Ok(())
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn timestamp(start_ms: i64, i: usize, rate_hz: f64) -> i64 {
    start_ms + (i as f64 * 1000.0 / rate_hz).round() as i64
}

/// Piecewise-linear interpolation through `(x, y)` knots, clamped at the ends.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let j = xs.partition_point(|&v| v < x);
    if xs[j] == x {
        return ys[j];
    }
    let frac = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    ys[j - 1] + frac * (ys[j] - ys[j - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolutionSpec {
    pub concentration_mg: f64,
    /// Absorbance per mg on each channel (absorptivity times path length).
    pub molar_absorptivity_profile: ChannelValues,
    pub solvent_baseline: ChannelValues,
}

impl Default for SolutionSpec {
    fn default() -> Self {
        Self {
            concentration_mg: 200.0,
            molar_absorptivity_profile: [
                0.00044, 0.00048, 0.00056, 0.00067, 0.00081, 0.00096, 0.0011, 0.00119, 0.00119,
                0.00108, 0.00087, 0.00072, 0.0006, 0.0005, 0.00042, 0.0004, 0.0004, 0.0004,
            ],
            solvent_baseline: [
                0.02, 0.0202, 0.0209, 0.022, 0.0236, 0.0256, 0.028, 0.0309, 0.0342, 0.0397,
                0.046, 0.051, 0.0565, 0.0636, 0.077, 0.0921, 0.1055, 0.12,
            ],
        }
    }
}

impl SolutionSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.concentration_mg.is_finite() && self.concentration_mg >= 0.0) {
            return Err(invalid("concentration must be finite and non-negative"));
        }
        let p = &self.molar_absorptivity_profile;
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("absorptivity profile must be finite and non-negative"));
        }
        if p.iter().all(|&v| v == 0.0) {
            return Err(invalid("absorptivity profile is all zero"));
        }
        if self.solvent_baseline.iter().any(|v| !v.is_finite()) {
            return Err(invalid("solvent baseline must be finite"));
        }
        Ok(())
    }

    /// `baseline + concentration * profile` per channel.
    pub fn channel_absorbance(&self) -> ChannelValues {
        std::array::from_fn(|c| {
            self.solvent_baseline[c] + self.concentration_mg * self.molar_absorptivity_profile[c]
        })
    }

    /// The same model between channels: baseline and profile are linear in
    /// wavelength between the channel centres.
    pub fn absorbance_at(&self, wavelength_nm: f64) -> f64 {
        let wl = &DEFAULT_WAVELENGTHS_NM;
        let b = interp(wl, &self.solvent_baseline, wavelength_nm);
        let p = interp(wl, &self.molar_absorptivity_profile, wavelength_nm);
        b + self.concentration_mg * p
    }
}

/// The sensor under test: a known source, hidden per-channel gain errors and
/// additive absorbance noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorModel {
    pub i0: ChannelValues,
    /// Multiplies every reading; `fit_channel_gains` should return the inverse.
    pub hidden_gains: ChannelValues,
    /// Standard deviation in absorbance units.
    pub noise_sigma: f64,
    pub n_samples: usize,
    pub rate_hz: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            i0: [20_000.0; NUM_CHANNELS],
            hidden_gains: [1.0; NUM_CHANNELS],
            noise_sigma: 0.0,
            n_samples: 100,
            rate_hz: 1.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.i0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("i0 must be positive"));
        }
        if self.hidden_gains.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("hidden gains must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid("noise sigma must be non-negative"));
        }
        if self.n_samples == 0 {
            return Err(invalid("n_samples must be at least 1"));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(invalid("rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRun {
    /// Raw sensor readings, hidden gains included.
    pub frames: Vec<SpectralFrame>,
    /// Unit-gain absorbance of `frames` against the known source.
    pub triad: AbsorbanceSeries,
    /// Noise-free, gain-free spectrum at high resolution.
    pub reference: ReferenceSpectrum,
    pub true_absorbance: ChannelValues,
}

/// Uniform grid over 410..=940 nm merged with the channel centres, so that
/// resampling onto the channels reproduces the channel values exactly.
pub fn reference_grid(resolution: usize) -> Vec<f64> {
    let (lo, hi) = (DEFAULT_WAVELENGTHS_NM[0], DEFAULT_WAVELENGTHS_NM[NUM_CHANNELS - 1]);
    let mut grid: Vec<f64> = (0..resolution)
        .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
        .chain(DEFAULT_WAVELENGTHS_NM)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn simulate_solution(
    spec: &SolutionSpec,
    sensor: &SensorModel,
    reference_resolution: usize,
    seed: u64,
) -> Result<SolutionRun, SynthError> {
    spec.validate()?;
    sensor.validate()?;
    if reference_resolution < 2 {
        return Err(invalid("reference resolution must be at least 2"));
    }
    let truth = spec.channel_absorbance();
    let mut rng = derived_rng(seed, NOISE_STREAM);
    let mut frames = Vec::with_capacity(sensor.n_samples);
    for i in 0..sensor.n_samples {
        let channels = std::array::from_fn(|c| {
            let noise = if sensor.noise_sigma > 0.0 {
                sensor.noise_sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            sensor.hidden_gains[c] * sensor.i0[c] * 10f64.powf(-(truth[c] + noise))
        });
        frames.push(SpectralFrame::new(timestamp(0, i, sensor.rate_hz), channels)?);
    }
    let profile = CalibrationProfile::from_i0(sensor.i0, 0)?;
    let triad = absorbance_series(&frames, &profile, ChannelMap::default())?;
    let wavelengths_nm = reference_grid(reference_resolution);
    let row: Vec<f64> = wavelengths_nm.iter().map(|&w| spec.absorbance_at(w)).collect();
    let reference = ReferenceSpectrum {
        timestamps_ms: triad.timestamps_ms().to_vec(),
        wavelengths_nm,
        absorbance: vec![row; sensor.n_samples],
    };
    Ok(SolutionRun {
        frames,
        triad,
        reference,
        true_absorbance: truth,
    })
}

/// Session timeline. Trajectory knots are `[fraction_of_duration, dehydration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionSpec {
    pub duration_s: f64,
    pub rate_hz: f64,
    pub trajectory: Vec<[f64; 2]>,
    /// Frequency and relative depth of the hydration-coupled modulation.
    pub modulation_hz: f64,
    pub modulation_depth: f64,
    /// Frequency of the label-independent baseline drift.
    pub drift_hz: f64,
    pub start_ms: i64,
}

impl Default for SessionSpec {
    fn default() -> Self {
        Self {
            duration_s: 1800.0,
            rate_hz: 1.0,
            trajectory: vec![[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]],
            modulation_hz: 0.05,
            modulation_depth: 0.5,
            drift_hz: 0.002,
            start_ms: 1_700_000_000_000,
        }
    }
}

impl SessionSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid("duration must be positive"));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(invalid("rate must be positive"));
        }
        let k = &self.trajectory;
        if k.len() < 2 || k[0][0] != 0.0 || k[k.len() - 1][0] != 1.0 {
            return Err(invalid("trajectory knots must start at 0 and end at 1"));
        }
        if k.windows(2).any(|w| !(w[1][0] > w[0][0]) || w[1][1] < w[0][1]) {
            return Err(invalid("trajectory knot times must increase and values must not decrease"));
        }
        if k.iter().any(|p| !(0.0..=1.0).contains(&p[1])) {
            return Err(invalid("trajectory values must lie in [0, 1]"));
        }
        for (name, v) in [
            ("modulation_hz", self.modulation_hz),
            ("modulation_depth", self.modulation_depth),
            ("drift_hz", self.drift_hz),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.rate_hz).floor() as usize
    }

    /// Dehydration level in [0, 1] at `t_s` seconds into the session.
    pub fn dehydration(&self, t_s: f64) -> f64 {
        let xs: Vec<f64> = self.trajectory.iter().map(|p| p[0] * self.duration_s).collect();
        let ys: Vec<f64> = self.trajectory.iter().map(|p| p[1]).collect();
        interp(&xs, &ys, t_s)
    }
}

pub fn label_for(dehydration: f64) -> HydrationLabel {
    if dehydration < 1.0 / 3.0 {
        HydrationLabel::FullyHydrated
    } else if dehydration < 2.0 / 3.0 {
        HydrationLabel::MidHydrated
    } else {
        HydrationLabel::Dehydrated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantSpec {
    pub subject_id: u32,
    /// Multiplier on transmitted intensity; lower for darker skin.
    pub skin_attenuation: f64,
    pub baseline_absorbance: ChannelValues,
    /// Absorbance shift per unit dehydration.
    pub hydration_sensitivity: ChannelValues,
    /// Additive intensity noise as a fraction of `i0`.
    pub noise_sigma: f64,
    /// Amplitude of the out-of-band drift, in absorbance.
    pub drift_amplitude: f64,
    pub i0: ChannelValues,
    pub seed: u64,
}

impl ParticipantSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.skin_attenuation > 0.0 && self.skin_attenuation <= 1.0) {
            return Err(invalid("skin attenuation must lie in (0, 1]"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid("noise sigma must be non-negative"));
        }
        if !self.drift_amplitude.is_finite() {
            return Err(invalid("drift amplitude must be finite"));
        }
        if self.i0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("i0 must be positive"));
        }
        if self
            .baseline_absorbance
            .iter()
            .chain(&self.hydration_sensitivity)
            .any(|v| !v.is_finite())
        {
            return Err(invalid("baseline and sensitivity must be finite"));
        }
        Ok(())
    }

    /// Modulation and drift phases, fixed by the participant seed.
    pub fn phases(&self) -> (f64, f64) {
        let mut rng = derived_rng(self.seed, PHASE_STREAM);
        (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI))
    }

    /// Noise-free skin absorbance at `t_s`, before skin attenuation.
    pub fn absorbance_at(&self, session: &SessionSpec, t_s: f64) -> ChannelValues {
        let (phi, psi) = self.phases();
        let d = session.dehydration(t_s);
        let modulation = 1.0 + session.modulation_depth * (2.0 * PI * session.modulation_hz * t_s + phi).sin();
        let drift = self.drift_amplitude * (2.0 * PI * session.drift_hz * t_s + psi).sin();
        std::array::from_fn(|c| {
            self.baseline_absorbance[c] + d * modulation * self.hydration_sensitivity[c] + drift
        })
    }

    /// Calibration against this participant's source, unit gains.
    pub fn profile(&self, created_at_ms: i64) -> Result<CalibrationProfile, SynthError> {
        Ok(CalibrationProfile::from_i0(self.i0, created_at_ms)?)
    }
}

/// Raw intensity frames for one session, split into one recording per
/// contiguous run of equal labels.
pub fn simulate_participant(
    p: &ParticipantSpec,
    session: &SessionSpec,
) -> Result<Vec<RawRecording>, SynthError> {
    p.validate()?;
    session.validate()?;
    let mut rng = derived_rng(p.seed, NOISE_STREAM);
    let mut recordings: Vec<RawRecording> = Vec::new();
    for i in 0..session.n_samples() {
        let t = i as f64 / session.rate_hz;
        let a = p.absorbance_at(session, t);
        let mut channels = [0.0; NUM_CHANNELS];
        for c in 0..NUM_CHANNELS {
            let clean = p.i0[c] * p.skin_attenuation * 10f64.powf(-a[c]);
            channels[c] = if p.noise_sigma == 0.0 {
                clean
            } else {
                let mut tries = 0;
                loop {
                    let v = clean + p.noise_sigma * p.i0[c] * rng.sample::<f64, _>(StandardNormal);
                    if v > 0.0 {
                        break v;
                    }
                    tries += 1;
                    if tries == MAX_REDRAWS {
                        return Err(SynthError::NonPositiveIntensity { channel: c });
                    }
                }
            };
        }
        let frame = SpectralFrame::new(timestamp(session.start_ms, i, session.rate_hz), channels)?;
        let label = label_for(session.dehydration(t));
        match recordings.last_mut() {
            Some(r) if r.label == label => r.frames.push(frame),
            _ => recordings.push(RawRecording {
                subject_id: p.subject_id,
                label,
                frames: vec![frame],
            }),
        }
    }
    Ok(recordings)
}

/// Ranges the per-subject parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversitySpec {
    pub skin_attenuation: [f64; 2],
    pub baseline_absorbance: [f64; 2],
    pub sensitivity_profile: ChannelValues,
    /// Per-subject multiplier on `sensitivity_profile`.
    pub sensitivity_scale: [f64; 2],
    pub noise_sigma: [f64; 2],
    pub drift_amplitude: [f64; 2],
    pub i0: ChannelValues,
    /// Relative per-subject jitter of the source intensity.
    pub i0_jitter: f64,
}

impl Default for DiversitySpec {
    fn default() -> Self {
        Self {
            skin_attenuation: [0.25, 1.0],
            baseline_absorbance: [0.3, 1.2],
            sensitivity_profile: [
                0.03, 0.0324, 0.0347, 0.0371, 0.0394, 0.0418, 0.0442, 0.0465, 0.0489, 0.0522,
                0.0555, 0.0578, 0.0602, 0.063, 0.0677, 0.0725, 0.0762, 0.08,
            ],
            sensitivity_scale: [0.9, 1.1],
            noise_sigma: [0.0002, 0.0006],
            drift_amplitude: [0.01, 0.04],
            i0: [20_000.0; NUM_CHANNELS],
            i0_jitter: 0.05,
        }
    }
}

impl DiversitySpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_range("skin_attenuation", self.skin_attenuation)?;
        if !(self.skin_attenuation[0] > 0.0 && self.skin_attenuation[1] <= 1.0) {
            return Err(invalid("skin attenuation range must lie in (0, 1]"));
        }
        check_range("baseline_absorbance", self.baseline_absorbance)?;
        check_range("sensitivity_scale", self.sensitivity_scale)?;
        check_range("noise_sigma", self.noise_sigma)?;
        check_range("drift_amplitude", self.drift_amplitude)?;
        if self.noise_sigma[0] < 0.0 {
            return Err(invalid("noise sigma must be non-negative"));
        }
        if self.sensitivity_profile.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sensitivity profile must be finite"));
        }
        if self.i0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("i0 must be positive"));
        }
        if !(self.i0_jitter.is_finite() && (0.0..1.0).contains(&self.i0_jitter)) {
            return Err(invalid("i0 jitter must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Draws participant `index` (subject id `index + 1`).
    pub fn draw(&self, seed: u64, index: u32) -> ParticipantSpec {
        let mut rng = derived_rng(sub_seed(seed, SUBJECT_STREAM), index as u64);
        let skin_attenuation = uniform(&mut rng, self.skin_attenuation);
        let scale = uniform(&mut rng, self.sensitivity_scale);
        let noise_sigma = uniform(&mut rng, self.noise_sigma);
        let drift_amplitude = uniform(&mut rng, self.drift_amplitude);
        let baseline_absorbance = std::array::from_fn(|_| uniform(&mut rng, self.baseline_absorbance));
        let j = self.i0_jitter;
        let i0 = std::array::from_fn(|c| self.i0[c] * uniform(&mut rng, [1.0 - j, 1.0 + j]));
        ParticipantSpec {
            subject_id: index + 1,
            skin_attenuation,
            baseline_absorbance,
            hydration_sensitivity: self.sensitivity_profile.map(|s| s * scale),
            noise_sigma,
            drift_amplitude,
            i0,
            seed: rng.random(),
        }
    }
}

/// Everything needed to regenerate a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortConfig {
    pub n_subjects: usize,
    pub diversity: DiversitySpec,
    pub session: SessionSpec,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_subjects: 6,
            diversity: DiversitySpec::default(),
            session: SessionSpec::default(),
        }
    }
}

impl CohortConfig {
    /// The default cohort with every hydration sensitivity set to zero.
    pub fn chance() -> Self {
        let mut c = Self::default();
        c.diversity.sensitivity_scale = [0.0, 0.0];
        c
    }

    pub fn generate(&self, seed: u64) -> Result<Cohort, SynthError> {
        generate_cohort(self.n_subjects, &self.diversity, &self.session, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub participants: Vec<ParticipantSpec>,
    pub recordings: Vec<RawRecording>,
    pub profiles: BTreeMap<u32, CalibrationProfile>,
}

/// Ground truth written next to generated streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub seed: u64,
    pub config: CohortConfig,
    pub participants: Vec<ParticipantSpec>,
    /// Per subject, `(label code, frame count)` of each recording in order.
    pub recordings: BTreeMap<u32, Vec<(u8, usize)>>,
}

impl Cohort {
    /// Runs the feature pipeline over every recording.
    pub fn dataset(&self, config: &PipelineConfig) -> Result<(LabeledDataset, usize), PipelineError> {
        build_dataset_from_frames(&self.recordings, &self.profiles, config)
    }

    pub fn manifest(&self, config: &CohortConfig, seed: u64) -> CohortManifest {
        let mut recordings: BTreeMap<u32, Vec<(u8, usize)>> = BTreeMap::new();
        for r in &self.recordings {
            recordings
                .entry(r.subject_id)
                .or_default()
                .push((r.label.code(), r.frames.len()));
        }
        CohortManifest {
            seed,
            config: config.clone(),
            participants: self.participants.clone(),
            recordings,
        }
    }
}

pub fn generate_cohort(
    n_subjects: usize,
    diversity: &DiversitySpec,
    session: &SessionSpec,
    seed: u64,
) -> Result<Cohort, SynthError> {
    if n_subjects == 0 {
        return Err(invalid("n_subjects must be at least 1"));
    }
    diversity.validate()?;
    session.validate()?;
    let participants: Vec<ParticipantSpec> = (0..n_subjects as u32)
        .map(|i| diversity.draw(seed, i))
        .collect();
    let simulate = |p: &ParticipantSpec| simulate_participant(p, session);
    #[cfg(feature = "parallel")]
    let streams: Vec<Result<Vec<RawRecording>, SynthError>> = {
        use rayon::prelude::*;
        participants.par_iter().map(simulate).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let streams: Vec<Result<Vec<RawRecording>, SynthError>> = participants.iter().map(simulate).collect();

    let mut recordings = Vec::new();
    for s in streams {
        recordings.extend(s?);
    }
    let profiles = participants
        .iter()
        .map(|p| Ok((p.subject_id, p.profile(session.start_ms)?)))
        .collect::<Result<_, SynthError>>()?;
    Ok(Cohort {
        participants,
        recordings,
        profiles,
    })
}

/// Solution preset: one spec simulated at several concentrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolutionConfig {
    pub solution: SolutionSpec,
    pub concentrations_mg: Vec<f64>,
    pub sensor: SensorModel,
    pub reference_resolution: usize,
}

impl Default for SolutionConfig {
    fn default() -> Self {
        Self {
            solution: SolutionSpec::default(),
            concentrations_mg: vec![200.0, 400.0],
            sensor: SensorModel {
                hidden_gains: [
                    1.0, 1.0, 1.3, 1.0, 0.8, 1.0, 1.0, 2.0, 1.0, 1.0, 0.6, 1.0, 1.0, 1.0, 1.5,
                    1.0, 1.0, 2.5,
                ],
                ..SensorModel::default()
            },
            reference_resolution: 531,
        }
    }
}
