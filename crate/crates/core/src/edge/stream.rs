//! Fixed-memory streaming feature extraction and classification.

use serde::{Deserialize, Serialize};

use super::{infer, CompactModel, EdgeError};
use crate::dsp::{design_butterworth_bandpass, BiquadCascade, EvmParams};
use crate::features::{WindowSpec, FEATURE_DIM, FEATURE_VERSION, STATS_PER_CHANNEL};
use crate::forest::N_CLASSES;
use crate::spectra::{
    compute_absorbance, CalibrationProfile, ChannelValues, HydrationLabel, SpectralFrame,
    NUM_CHANNELS,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub evm: EvmParams,
    pub window: WindowSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamOutput {
    pub timestamp_ms: i64,
    pub label: HydrationLabel,
    pub probabilities: [f64; N_CLASSES],
}

/// Sliding-window extremum over a fixed-capacity ring. `MIN = true` tracks
/// the minimum, otherwise the maximum.
#[derive(Debug, Clone)]
pub struct MonoDeque<const MIN: bool> {
    seq: Vec<u64>,
    value: Vec<f64>,
    head: usize,
    len: usize,
}

impl<const MIN: bool> MonoDeque<MIN> {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            seq: vec![0; capacity],
            value: vec![0.0; capacity],
            head: 0,
            len: 0,
        }
    }

    fn slot(&self, i: usize) -> usize {
        (self.head + i) % self.seq.len()
    }

    fn dominated(&self, back: f64, incoming: f64) -> bool {
        if MIN {
            back >= incoming
        } else {
            back <= incoming
        }
    }

    /// Adds sample `seq` and drops samples older than `seq + 1 - window`.
    pub fn push(&mut self, seq: u64, v: f64, window: u64) {
        while self.len > 0 && self.dominated(self.value[self.slot(self.len - 1)], v) {
            self.len -= 1;
        }
        while self.len > 0 && self.seq[self.head] + window <= seq {
            self.head = (self.head + 1) % self.seq.len();
            self.len -= 1;
        }
        let at = self.slot(self.len);
        self.seq[at] = seq;
        self.value[at] = v;
        self.len += 1;
    }

    pub fn front(&self) -> Option<f64> {
        (self.len > 0).then(|| self.value[self.head])
    }

    fn heap_bytes(&self) -> usize {
        self.seq.capacity() * std::mem::size_of::<u64>()
            + self.value.capacity() * std::mem::size_of::<f64>()
    }
}

/// Per-sensor streaming state. All buffers are sized at construction.
#[derive(Debug, Clone)]
pub struct StreamState {
    alpha: f64,
    window: usize,
    stride: usize,
    cascade: BiquadCascade,
    /// Filter state for a constant unit input, scaled by the first sample.
    unit_state: [[f64; 2]; 4],
    filter: Vec<[[f64; 2]; 4]>,
    ring: Vec<ChannelValues>,
    head: usize,
    count: u64,
    last_timestamp_ms: Option<i64>,
    /// Running sums are kept relative to `shift` to limit cancellation.
    shift: ChannelValues,
    sum: ChannelValues,
    sum_sq: ChannelValues,
    abs_diff: ChannelValues,
    mins: Vec<MonoDeque<true>>,
    maxs: Vec<MonoDeque<false>>,
    features: Vec<f64>,
}

impl StreamState {
    pub fn new(config: &StreamConfig) -> Result<Self, EdgeError> {
        config
            .evm
            .validate()
            .map_err(|e| EdgeError::Config(e.to_string()))?;
        let (window, stride) = config.window.samples(config.evm.band.sample_rate_hz)?;
        let cascade = design_butterworth_bandpass(&config.evm.band)
            .map_err(|e| EdgeError::Config(e.to_string()))?;
        let mut unit_state = [[0.0; 2]; 4];
        for (dst, src) in unit_state.iter_mut().zip(cascade.steady_state(1.0)) {
            *dst = src;
        }
        Ok(Self {
            alpha: config.evm.alpha,
            unit_state,
            window,
            stride,
            filter: vec![[[0.0; 2]; 4]; NUM_CHANNELS],
            cascade,
            ring: vec![[0.0; NUM_CHANNELS]; window],
            head: 0,
            count: 0,
            last_timestamp_ms: None,
            shift: [0.0; NUM_CHANNELS],
            sum: [0.0; NUM_CHANNELS],
            sum_sq: [0.0; NUM_CHANNELS],
            abs_diff: [0.0; NUM_CHANNELS],
            mins: (0..NUM_CHANNELS).map(|_| MonoDeque::with_capacity(window)).collect(),
            maxs: (0..NUM_CHANNELS).map(|_| MonoDeque::with_capacity(window)).collect(),
            features: vec![0.0; FEATURE_DIM],
        })
    }

    pub fn window_samples(&self) -> usize {
        self.window
    }

    pub fn stride_samples(&self) -> usize {
        self.stride
    }

    pub fn frames_seen(&self) -> u64 {
        self.count
    }

    /// Features of the most recent emitted window.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Bytes held by the state, inline and on the heap.
    pub fn footprint_bytes(&self) -> usize {
        std::mem::size_of::<Self>()
            + self.cascade.sections.capacity() * std::mem::size_of::<crate::dsp::Biquad>()
            + self.filter.capacity() * std::mem::size_of::<[[f64; 2]; 4]>()
            + self.ring.capacity() * std::mem::size_of::<ChannelValues>()
            + self.mins.capacity() * std::mem::size_of::<MonoDeque<true>>()
            + self.maxs.capacity() * std::mem::size_of::<MonoDeque<false>>()
            + self.mins.iter().map(MonoDeque::heap_bytes).sum::<usize>()
            + self.maxs.iter().map(MonoDeque::heap_bytes).sum::<usize>()
            + self.features.capacity() * std::mem::size_of::<f64>()
    }

    fn magnify(&mut self, a: &ChannelValues) -> ChannelValues {
        let first = self.count == 0;
        let mut y = [0.0; NUM_CHANNELS];
        for c in 0..NUM_CHANNELS {
            let state = &mut self.filter[c];
            if first {
                for (st, unit) in state.iter_mut().zip(&self.unit_state) {
                    *st = unit.map(|u| u * a[c]);
                }
            }
            let mut v = a[c];
            for (s, st) in self.cascade.sections.iter().zip(state.iter_mut()) {
                v = s.tick(st, v);
            }
            y[c] = a[c] + self.alpha * v;
        }
        y
    }

    /// Recomputes the running sums from the ring, re-centred on the newest
    /// sample. Runs once per window length, keeping rounding drift bounded.
    fn resync(&mut self) {
        let w = self.window;
        let newest = self.ring[(self.head + w - 1) % w];
        for c in 0..NUM_CHANNELS {
            let shift = newest[c];
            let (mut s, mut sq, mut ad) = (0.0, 0.0, 0.0);
            for i in 0..w {
                let v = self.ring[(self.head + i) % w][c];
                let d = v - shift;
                s += d;
                sq += d * d;
                if i > 0 {
                    ad += (v - self.ring[(self.head + i - 1) % w][c]).abs();
                }
            }
            self.shift[c] = shift;
            self.sum[c] = s;
            self.sum_sq[c] = sq;
            self.abs_diff[c] = ad;
        }
    }

    fn push(&mut self, y: ChannelValues) {
        let w = self.window;
        let full = self.count >= w as u64;
        if self.count == 0 {
            self.shift = y;
        }
        let newest = (self.head + w - 1) % w;
        for c in 0..NUM_CHANNELS {
            if full {
                let oldest = self.ring[self.head][c];
                let second = self.ring[(self.head + 1) % w][c];
                let d = oldest - self.shift[c];
                self.sum[c] -= d;
                self.sum_sq[c] -= d * d;
                self.abs_diff[c] -= (second - oldest).abs();
            }
            if self.count > 0 {
                self.abs_diff[c] += (y[c] - self.ring[newest][c]).abs();
            }
            let d = y[c] - self.shift[c];
            self.sum[c] += d;
            self.sum_sq[c] += d * d;
            self.mins[c].push(self.count, y[c], w as u64);
            self.maxs[c].push(self.count, y[c], w as u64);
        }
        self.ring[self.head] = y;
        self.head = (self.head + 1) % w;
        self.count += 1;
        if self.head == 0 {
            self.resync();
        }
    }

    fn fill_features(&mut self) {
        let n = self.window as f64;
        for c in 0..NUM_CHANNELS {
            let mean_d = self.sum[c] / n;
            let var = (self.sum_sq[c] / n - mean_d * mean_d).max(0.0);
            let shift = self.shift[c];
            let sq = self.sum_sq[c] + 2.0 * shift * self.sum[c] + n * shift * shift;
            let out = &mut self.features[c * STATS_PER_CHANNEL..(c + 1) * STATS_PER_CHANNEL];
            out[0] = shift + mean_d;
            out[1] = var.sqrt();
            out[2] = self.mins[c].front().unwrap_or(0.0);
            out[3] = self.maxs[c].front().unwrap_or(0.0);
            out[4] = (sq.max(0.0) / n).sqrt();
            out[5] = self.abs_diff[c] / (n - 1.0);
        }
    }

    /// Consumes one frame. Returns a classification every `stride` frames
    /// once `window` frames have been seen. On error the state is unchanged.
    pub fn step(
        &mut self,
        frame: &SpectralFrame,
        profile: &CalibrationProfile,
        compact: &CompactModel,
    ) -> Result<Option<StreamOutput>, EdgeError> {
        if compact.feature_version() != FEATURE_VERSION {
            return Err(EdgeError::VersionMismatch {
                expected: FEATURE_VERSION,
                found: compact.feature_version(),
            });
        }
        if compact.min_features() > FEATURE_DIM {
            return Err(EdgeError::DimensionMismatch {
                expected: compact.min_features(),
                found: FEATURE_DIM,
            });
        }
        if let Some(previous) = self.last_timestamp_ms {
            if frame.timestamp_ms <= previous {
                return Err(EdgeError::OutOfOrderFrame {
                    previous,
                    got: frame.timestamp_ms,
                });
            }
        }
        let a = compute_absorbance(frame, profile)?;
        let y = self.magnify(&a);
        self.push(y);
        self.last_timestamp_ms = Some(frame.timestamp_ms);

        let w = self.window as u64;
        if self.count < w || !(self.count - w).is_multiple_of(self.stride as u64) {
            return Ok(None);
        }
        self.fill_features();
        let p = infer(compact, &self.features)?;
        Ok(Some(StreamOutput {
            timestamp_ms: frame.timestamp_ms,
            label: p.label,
            probabilities: p.probabilities,
        }))
    }
}

/// Free-function form of [`StreamState::step`].
pub fn stream_step(
    state: &mut StreamState,
    frame: &SpectralFrame,
    profile: &CalibrationProfile,
    compact: &CompactModel,
) -> Result<Option<StreamOutput>, EdgeError> {
    state.step(frame, profile, compact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::eulerian_magnify_causal;
    use crate::edge::compile_model;
    use crate::features::extract_features_samples;
    use crate::forest::{ForestModel, TreeNode};
    use crate::spectra::{absorbance_series, ChannelMap};
    use proptest::prelude::*;

    fn leaf_model() -> CompactModel {
        compile_model(&ForestModel {
            trees: vec![TreeNode::Internal {
                feature_index: 0,
                threshold: 0.0,
                left: Box::new(TreeNode::Leaf { class_counts: [1, 0, 0] }),
                right: Box::new(TreeNode::Leaf { class_counts: [0, 0, 1] }),
            }],
            n_estimators: 1,
            max_depth: 1,
            n_features: FEATURE_DIM,
            feature_version: FEATURE_VERSION,
            label_codes: [0, 1, 2],
            rng_seed: 0,
        })
        .unwrap()
    }

    fn frames(n: usize, dt_ms: i64) -> Vec<SpectralFrame> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                let ch = std::array::from_fn(|c| {
                    1000.0 * (1.0 + 0.3 * (0.31 * t + c as f64).sin() + 0.1 * (0.05 * t * (c + 1) as f64).cos())
                });
                SpectralFrame::new(i as i64 * dt_ms, ch).unwrap()
            })
            .collect()
    }

    fn profile() -> CalibrationProfile {
        CalibrationProfile::from_i0([2000.0; NUM_CHANNELS], 0).unwrap()
    }

    #[test]
    fn first_output_at_window_then_every_stride() {
        let mut st = StreamState::new(&StreamConfig::default()).unwrap();
        let model = leaf_model();
        let emitted: Vec<usize> = frames(100, 1000)
            .iter()
            .enumerate()
            .filter_map(|(i, f)| st.step(f, &profile(), &model).unwrap().map(|_| i + 1))
            .collect();
        assert_eq!(emitted, vec![60, 70, 80, 90, 100]);
    }

    #[test]
    fn matches_offline_causal_path() {
        let config = StreamConfig::default();
        let fr = frames(400, 1000);
        let mut st = StreamState::new(&config).unwrap();
        let model = leaf_model();
        let mut streamed = Vec::new();
        for f in &fr {
            if let Some(out) = st.step(f, &profile(), &model).unwrap() {
                streamed.push((out.timestamp_ms, st.features().to_vec()));
            }
        }
        let series = absorbance_series(&fr, &profile(), ChannelMap::default()).unwrap();
        let causal = eulerian_magnify_causal(&series, &config.evm).unwrap();
        let offline = extract_features_samples(&causal, 60, 10).unwrap();
        assert_eq!(streamed.len(), offline.len());
        for ((t, s), o) in streamed.iter().zip(&offline) {
            assert_eq!(*t, o.window_end_ms);
            for (a, b) in s.iter().zip(&o.values) {
                assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn out_of_order_leaves_state_unchanged() {
        let mut st = StreamState::new(&StreamConfig::default()).unwrap();
        let model = leaf_model();
        let fr = frames(3, 1000);
        st.step(&fr[0], &profile(), &model).unwrap();
        st.step(&fr[1], &profile(), &model).unwrap();
        let err = st.step(&fr[0], &profile(), &model).unwrap_err();
        assert_eq!(err, EdgeError::OutOfOrderFrame { previous: 1000, got: 0 });
        assert_eq!(st.frames_seen(), 2);
        let mut zero = fr[2];
        zero.channels[4] = 0.0;
        assert!(matches!(st.step(&zero, &profile(), &model), Err(EdgeError::Spectra(_))));
        assert_eq!(st.frames_seen(), 2);
    }

    #[test]
    fn footprint_is_constant() {
        let mut st = StreamState::new(&StreamConfig::default()).unwrap();
        let model = leaf_model();
        let before = st.footprint_bytes();
        for f in frames(1000, 1000) {
            st.step(&f, &profile(), &model).unwrap();
        }
        assert_eq!(st.footprint_bytes(), before);
    }

    proptest! {
        #[test]
        fn deque_tracks_window_extrema(xs in prop::collection::vec(-100.0f64..100.0, 1..200), w in 1usize..20) {
            let mut lo = MonoDeque::<true>::with_capacity(w);
            let mut hi = MonoDeque::<false>::with_capacity(w);
            for (i, &x) in xs.iter().enumerate() {
                lo.push(i as u64, x, w as u64);
                hi.push(i as u64, x, w as u64);
                let win = &xs[(i + 1).saturating_sub(w)..=i];
                prop_assert_eq!(lo.front().unwrap(), win.iter().copied().fold(f64::INFINITY, f64::min));
                prop_assert_eq!(hi.front().unwrap(), win.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }
}
