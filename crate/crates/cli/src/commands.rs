use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use hydrotrack_core::dsp::{
    check_uniform, design_butterworth_bandpass, filtfilt, sosfilt_steady,
};
use hydrotrack_core::edge::{compile_audited, infer, CompactModel, StreamConfig, StreamState, MAGIC};
use hydrotrack_core::features::{feature_names, LabeledDataset};
use hydrotrack_core::forest::{
    cross_validate, evaluate_predictions, holdout_split, per_subject_evaluate,
    read_predictions_csv, train_forest, EvalReport, ForestModel,
};
use hydrotrack_core::io::{
    read_frames_csv, read_reference_csv, write_frames_csv, write_reference_csv, FrameReader,
};
use hydrotrack_core::pipeline::{build_dataset_from_frames, Magnification, RawRecording};
use hydrotrack_core::spectra::{
    absorbance_series, fit_channel_gains, gain_residuals, CalibrationProfile, ChannelMap,
    ChannelValues, HydrationLabel, SpectralFrame, NUM_CHANNELS,
};
use hydrotrack_core::synth::{reference_grid, simulate_solution, CohortManifest, SolutionSpec};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{data, validation, CliError, Result};
use crate::Pace;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    /// Creates the output directory and records the resolved config in it.
    pub fn new(config: RunConfig, out: PathBuf, writes_output: bool) -> Result<Self> {
        let ctx = Self { config, out };
        if writes_output {
            fs::create_dir_all(&ctx.out)
                .map_err(|e| data(format!("cannot create {}: {e}", ctx.out.display())))?;
            ctx.write("config.json", ctx.config.to_json().as_bytes())?;
        }
        Ok(ctx)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| data(format!("cannot create {}: {e}", parent.display())))?;
        }
        fs::write(&path, bytes).map_err(|e| data(format!("cannot write {}: {e}", path.display())))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Internal(format!("serializing {name}: {e}")))?;
        self.write(name, (text + "\n").as_bytes())
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| data(format!("cannot create {}: {e}", parent.display())))?;
        }
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| data(format!("cannot create {}: {e}", path.display())))
    }
}

/// Where a feature dataset comes from.
pub enum DataSource {
    Dataset(PathBuf),
    Raw(PathBuf),
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| data(format!("cannot open {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| data(format!("cannot parse {}: {e}", path.display())))
}

fn flush(w: &mut impl Write, what: &str) -> Result<()> {
    w.flush().map_err(|e| data(format!("cannot write {what}: {e}")))
}

pub fn subject_stem(id: u32) -> String {
    format!("subject_{id:02}")
}

/// Raw recordings and profiles from a `gen-data` directory. The manifest
/// says how each subject's stream splits into labeled recordings.
pub fn read_cohort_dir(
    dir: &Path,
) -> Result<(Vec<RawRecording>, BTreeMap<u32, CalibrationProfile>)> {
    let manifest: CohortManifest = read_json(&dir.join("manifest.json"))?;
    let map = ChannelMap::default();
    let mut recordings = Vec::new();
    let mut profiles = BTreeMap::new();
    for (&subject_id, segments) in &manifest.recordings {
        let stem = subject_stem(subject_id);
        let csv = dir.join(format!("{stem}.csv"));
        let frames = read_frames_csv(open(&csv)?, &map)
            .map_err(|e| data(format!("{}: {e}", csv.display())))?;
        let expected: usize = segments.iter().map(|s| s.1).sum();
        if expected != frames.len() {
            return Err(data(format!(
                "{} has {} frames, manifest lists {expected}",
                csv.display(),
                frames.len()
            )));
        }
        let mut rest = frames.as_slice();
        for &(code, count) in segments {
            let label = HydrationLabel::from_code(code)
                .ok_or_else(|| data(format!("manifest has invalid label code {code}")))?;
            let (head, tail) = rest.split_at(count);
            recordings.push(RawRecording {
                subject_id,
                label,
                frames: head.to_vec(),
            });
            rest = tail;
        }
        let profile: CalibrationProfile = read_json(&dir.join(format!("{stem}.profile.json")))?;
        profiles.insert(subject_id, profile);
    }
    Ok((recordings, profiles))
}

fn load_dataset(ctx: &Context, source: &DataSource) -> Result<LabeledDataset> {
    match source {
        DataSource::Dataset(path) => LabeledDataset::read_csv(open(path)?)
            .map_err(|e| data(format!("{}: {e}", path.display()))),
        DataSource::Raw(dir) => {
            let (recordings, profiles) = read_cohort_dir(dir)?;
            let (ds, skipped) = build_dataset_from_frames(&recordings, &profiles, &ctx.config.pipeline)?;
            if skipped > 0 {
                eprintln!("skipped {skipped} recordings shorter than one window");
            }
            Ok(ds)
        }
    }
}

fn write_dataset(ctx: &Context, name: &str, ds: &LabeledDataset) -> Result<()> {
    let mut w = ctx.create(name)?;
    ds.write_csv(&mut w, &feature_names(&ChannelMap::default()))?;
    flush(&mut w, name)
}

fn write_frames(ctx: &Context, name: &str, frames: &[SpectralFrame]) -> Result<()> {
    let mut w = ctx.create(name)?;
    write_frames_csv(&mut w, frames, &ChannelMap::default())?;
    flush(&mut w, name)
}

fn mg_name(c: f64) -> String {
    if c.fract() == 0.0 {
        format!("{}", c as i64)
    } else {
        format!("{c}")
    }
}

pub fn gen_data(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let cohort = cfg.cohort.generate(cfg.seed)?;
    let manifest = cohort.manifest(&cfg.cohort, cfg.seed);
    let mut by_subject: BTreeMap<u32, Vec<SpectralFrame>> = BTreeMap::new();
    for r in &cohort.recordings {
        by_subject.entry(r.subject_id).or_default().extend_from_slice(&r.frames);
    }
    for (id, frames) in &by_subject {
        let stem = subject_stem(*id);
        write_frames(ctx, &format!("{stem}.csv"), frames)?;
        ctx.write_json(&format!("{stem}.profile.json"), &cohort.profiles[id])?;
    }
    ctx.write_json("manifest.json", &manifest)?;

    let sol = &cfg.solution;
    let source = SpectralFrame::new(0, sol.sensor.i0)?;
    write_frames(ctx, "solution/i0.csv", &[source])?;
    for (k, &c) in sol.concentrations_mg.iter().enumerate() {
        let spec = SolutionSpec {
            concentration_mg: c,
            ..sol.solution.clone()
        };
        let run = simulate_solution(&spec, &sol.sensor, sol.reference_resolution, cfg.seed ^ k as u64)?;
        let name = mg_name(c);
        write_frames(ctx, &format!("solution/measured_{name}mg.csv"), &run.frames)?;
        let mut w = ctx.create(&format!("solution/reference_{name}mg.csv"))?;
        write_reference_csv(&mut w, &run.reference)?;
        flush(&mut w, "reference")?;
    }

    let mut table = String::new();
    let _ = writeln!(table, "{:>8}{:>12}{:>10}{:>8}{:>8}{:>8}", "Subject", "Atten", "Noise", "Full", "Mid", "Dehyd");
    for p in &cohort.participants {
        let mut counts = [0usize; 3];
        for &(code, n) in &manifest.recordings[&p.subject_id] {
            counts[code as usize] += n;
        }
        let _ = writeln!(
            table,
            "{:>8}{:>12.3}{:>10.5}{:>8}{:>8}{:>8}",
            p.subject_id, p.skin_attenuation, p.noise_sigma, counts[0], counts[1], counts[2]
        );
    }
    print!("{table}");
    println!("wrote {} subject streams to {}", by_subject.len(), ctx.out.display());
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport {
    wavelengths_nm: ChannelValues,
    gains: ChannelValues,
    residuals: ChannelValues,
}

fn mean_frame(frames: &[SpectralFrame]) -> Result<ChannelValues> {
    if frames.is_empty() {
        return Err(data("I0 file has no frames"));
    }
    let mut m = [0.0; NUM_CHANNELS];
    for f in frames {
        for (acc, v) in m.iter_mut().zip(&f.channels) {
            *acc += v;
        }
    }
    Ok(m.map(|v| v / frames.len() as f64))
}

pub fn calibrate(ctx: &Context, i0: Option<&Path>, measured: &Path, reference: &Path) -> Result<()> {
    let map = ChannelMap::default();
    let i0 = match i0 {
        Some(path) => mean_frame(
            &read_frames_csv(open(path)?, &map).map_err(|e| data(format!("{}: {e}", path.display())))?,
        )?,
        None => ctx.config.solution.sensor.i0,
    };
    let frames = read_frames_csv(open(measured)?, &map)
        .map_err(|e| data(format!("{}: {e}", measured.display())))?;
    let created_at = frames.first().map_or(0, |f| f.timestamp_ms);
    let unit = CalibrationProfile::from_i0(i0, created_at)?;
    let measured_a = absorbance_series(&frames, &unit, map)?;
    let reference_a = read_reference_csv(open(reference)?)
        .map_err(|e| data(format!("{}: {e}", reference.display())))?
        .resample(&map)?;
    let profile = fit_channel_gains(&measured_a, &reference_a, &i0, created_at)?;
    let residuals = gain_residuals(&measured_a, &reference_a, &profile);
    ctx.write_json("profile.json", &profile)?;
    let report = CalibrationReport {
        wavelengths_nm: *map.wavelengths_nm(),
        gains: *profile.gains(),
        residuals,
    };
    ctx.write_json("calibration.json", &report)?;
    println!("{:>10}{:>12}{:>14}", "Channel", "Gain", "Residual");
    for c in 0..NUM_CHANNELS {
        println!("{:>10}{:>12.6}{:>14.3e}", map.column_name(c), report.gains[c], residuals[c]);
    }
    Ok(())
}

pub fn preprocess(ctx: &Context, dir: &Path) -> Result<()> {
    let ds = load_dataset(ctx, &DataSource::Raw(dir.to_path_buf()))?;
    write_dataset(ctx, "dataset.csv", &ds)?;
    let counts = ds.class_counts();
    println!(
        "{} windows from {} subjects (classes {} / {} / {})",
        ds.len(),
        ds.subjects().len(),
        counts[0],
        counts[1],
        counts[2]
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    train_rows: usize,
    test_rows: usize,
    train_accuracy: f64,
    test: EvalReport,
    model_bytes: usize,
    audited_rows: usize,
}

pub fn train(ctx: &Context, source: &DataSource) -> Result<()> {
    let cfg = &ctx.config;
    let ds = load_dataset(ctx, source)?;
    let (train_idx, test_idx) = holdout_split(&ds, cfg.seed);
    let train = ds.subset(&train_idx);
    let test = ds.subset(&test_idx);
    let model = train_forest(&train, &cfg.forest, cfg.seed)?;
    let train_accuracy = hydrotrack_core::forest::evaluate(&model, &train)?.accuracy;
    let report = hydrotrack_core::forest::evaluate(&model, &test)?;
    let (compact, audit) = compile_audited(&model, &train.rows)?;

    write_dataset(ctx, "train.csv", &train)?;
    write_dataset(ctx, "test.csv", &test)?;
    ctx.write("model.json", (model.to_json() + "\n").as_bytes())?;
    ctx.write("model.bin", compact.as_bytes())?;
    ctx.write_json(
        "report.json",
        &TrainReport {
            train_rows: train.len(),
            test_rows: test.len(),
            train_accuracy,
            test: report.clone(),
            model_bytes: compact.len(),
            audited_rows: audit.checked,
        },
    )?;
    print!("{}", report.to_table());
    println!("model.bin: {} bytes, {} trees", compact.len(), compact.n_trees());
    Ok(())
}

enum LoadedModel {
    Forest(ForestModel),
    Compact(CompactModel),
}

fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = fs::read(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    if bytes.starts_with(&MAGIC) {
        return Ok(LoadedModel::Compact(CompactModel::from_bytes(bytes)?));
    }
    serde_json::from_slice(&bytes)
        .map(LoadedModel::Forest)
        .map_err(|e| data(format!("{} is neither a compiled nor a JSON model: {e}", path.display())))
}

pub fn evaluate(
    ctx: &Context,
    dataset: &Path,
    model: Option<&Path>,
    predictions: Option<&Path>,
) -> Result<()> {
    let ds = load_dataset(ctx, &DataSource::Dataset(dataset.to_path_buf()))?;
    let report = match (model, predictions) {
        (_, Some(p)) => evaluate_predictions(&ds, &read_predictions_csv(open(p)?)?)?,
        (Some(m), None) => match load_model(m)? {
            LoadedModel::Forest(f) => hydrotrack_core::forest::evaluate(&f, &ds)?,
            LoadedModel::Compact(c) => {
                if ds.is_empty() {
                    return Err(data("dataset is empty"));
                }
                let predicted = ds
                    .rows
                    .iter()
                    .map(|x| infer(&c, x).map(|p| p.label))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                EvalReport::from_labels(&ds.labels, &predicted)?
            }
        },
        (None, None) => return Err(validation("need --model or --predictions")),
    };
    ctx.write_json("evaluation.json", &report)?;
    print!("{}", report.to_table());
    Ok(())
}

pub fn cv(ctx: &Context, source: &DataSource) -> Result<()> {
    let cfg = &ctx.config;
    let ds = load_dataset(ctx, source)?;
    let result = cross_validate(&ds, cfg.cv.folds, cfg.cv.grouped, &cfg.forest, cfg.seed)?;
    ctx.write_json("cv.json", &result)?;
    println!("{:>6}{:>8}{:>10}{:>10}", "Fold", "Rows", "Train", "Test");
    for (i, f) in result.folds.iter().enumerate() {
        println!("{:>6}{:>8}{:>10.4}{:>10.4}", i, f.test_rows, f.train_accuracy, f.report.accuracy);
    }
    println!(
        "{}-fold {}: accuracy {:.4} +/- {:.4}, generalization gap {:.4}",
        result.k,
        if result.grouped { "grouped" } else { "stratified" },
        result.mean_accuracy,
        result.std_accuracy,
        result.generalization_gap()
    );
    Ok(())
}

pub fn per_subject(ctx: &Context, source: &DataSource) -> Result<()> {
    let cfg = &ctx.config;
    let ds = load_dataset(ctx, source)?;
    let result = per_subject_evaluate(&ds, &cfg.forest, cfg.seed)?;
    ctx.write_json("per_subject.json", &result)?;
    println!("{:>8}{:>10}", "Subject", "Accuracy");
    for (s, a) in &result.accuracies {
        println!("{s:>8}{a:>10.4}");
    }
    for (s, why) in &result.skipped {
        println!("{s:>8}  skipped: {why}");
    }
    if let Some(m) = result.mean_accuracy() {
        println!("{:>8}{m:>10.4}", "Mean");
    }
    Ok(())
}

pub fn compile(ctx: &Context, model: &Path, corpus: Option<&Path>) -> Result<()> {
    let forest: ForestModel = read_json(model)?;
    let rows = match corpus {
        Some(path) => load_dataset(ctx, &DataSource::Dataset(path.to_path_buf()))?.rows,
        None => Vec::new(),
    };
    let (compact, audit) = compile_audited(&forest, &rows)?;
    ctx.write("model.bin", compact.as_bytes())?;
    println!(
        "model.bin: {} bytes, {} trees, {} leaves; argmax agreement {}/{}",
        compact.len(),
        compact.n_trees(),
        compact.n_leaves(),
        audit.checked - audit.disagreements.len(),
        audit.checked
    );
    Ok(())
}

fn stream_config(ctx: &Context) -> StreamConfig {
    let p = &ctx.config.pipeline;
    let mut evm = p.evm;
    if p.magnification == Magnification::Off {
        evm.alpha = 0.0;
    }
    StreamConfig {
        evm,
        window: p.window,
    }
}

pub fn stream(ctx: &Context, model: &Path, profile: &Path, pace: Pace) -> Result<()> {
    if ctx.config.pipeline.magnification == Magnification::ZeroPhase {
        log::info!("streaming uses the causal filter; zero-phase applies offline only");
    }
    let bytes = fs::read(model).map_err(|e| data(format!("cannot read {}: {e}", model.display())))?;
    let compact = CompactModel::from_bytes(bytes)?;
    let profile: CalibrationProfile = read_json(profile)?;
    let mut state = StreamState::new(&stream_config(ctx))?;
    let stdin = io::stdin();
    let mut reader = FrameReader::new(stdin.lock(), &ChannelMap::default())?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut previous: Option<i64> = None;
    while let Some(frame) = reader.next_frame()? {
        if pace == Pace::Real {
            if let Some(p) = previous {
                let dt = frame.timestamp_ms.saturating_sub(p).max(0) as u64;
                std::thread::sleep(Duration::from_millis(dt));
            }
            previous = Some(frame.timestamp_ms);
        }
        if let Some(o) = state.step(&frame, &profile, &compact)? {
            let [p0, p1, p2] = o.probabilities;
            writeln!(out, "{},{},{p0},{p1},{p2}", o.timestamp_ms, o.label.code())
                .and_then(|_| out.flush())
                .map_err(|e| data(format!("cannot write output: {e}")))?;
        }
    }
    Ok(())
}

pub fn plot_data(ctx: &Context, frames: Option<&Path>, profile: Option<&Path>) -> Result<()> {
    let cfg = &ctx.config;
    let sol = &cfg.solution;
    if sol.concentrations_mg.is_empty() {
        return Err(validation("solution.concentrations_mg is empty"));
    }
    let specs: Vec<SolutionSpec> = sol
        .concentrations_mg
        .iter()
        .map(|&c| SolutionSpec {
            concentration_mg: c,
            ..sol.solution.clone()
        })
        .collect();
    for s in &specs {
        s.validate()?;
    }
    let header: Vec<String> = sol
        .concentrations_mg
        .iter()
        .map(|&c| format!("{}mg", mg_name(c)))
        .collect();

    let mut spectra = String::new();
    let _ = writeln!(spectra, "wavelength_nm,{}", header.join(","));
    for w in reference_grid(sol.reference_resolution.max(2)) {
        let row: Vec<String> = specs.iter().map(|s| s.absorbance_at(w).to_string()).collect();
        let _ = writeln!(spectra, "{w},{}", row.join(","));
    }
    ctx.write("solution_spectra.csv", spectra.as_bytes())?;

    let measured: Vec<ChannelValues> = specs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let run = simulate_solution(s, &sol.sensor, sol.reference_resolution, cfg.seed ^ k as u64)?;
            Ok(run.triad.channel_means())
        })
        .collect::<Result<_>>()?;
    let map = ChannelMap::default();
    let mut channels = String::new();
    let _ = writeln!(
        channels,
        "wavelength_nm,{},{}",
        header.iter().map(|h| format!("true_{h}")).collect::<Vec<_>>().join(","),
        header.iter().map(|h| format!("measured_{h}")).collect::<Vec<_>>().join(",")
    );
    for c in 0..NUM_CHANNELS {
        let truth: Vec<String> = specs.iter().map(|s| s.channel_absorbance()[c].to_string()).collect();
        let meas: Vec<String> = measured.iter().map(|m| m[c].to_string()).collect();
        let _ = writeln!(channels, "{},{},{}", map.wavelengths_nm()[c], truth.join(","), meas.join(","));
    }
    ctx.write("solution_channels.csv", channels.as_bytes())?;

    if let (Some(frames), Some(profile)) = (frames, profile) {
        evm_series(ctx, frames, profile)?;
    }
    println!("wrote plot series to {}", ctx.out.display());
    Ok(())
}

/// Long-format absorbance, band-pass and magnified series, so that
/// `magnified - absorbance == alpha * bandpass` row by row.
fn evm_series(ctx: &Context, frames_path: &Path, profile_path: &Path) -> Result<()> {
    let map = ChannelMap::default();
    let frames = read_frames_csv(open(frames_path)?, &map)
        .map_err(|e| data(format!("{}: {e}", frames_path.display())))?;
    if frames.is_empty() {
        return Err(data(format!("{} has no frames", frames_path.display())));
    }
    let profile: CalibrationProfile = read_json(profile_path)?;
    let series = absorbance_series(&frames, &profile, map)?;
    let p = &ctx.config.pipeline;
    p.evm.validate()?;
    check_uniform(series.timestamps_ms(), p.evm.band.sample_rate_hz)?;
    let cascade = design_butterworth_bandpass(&p.evm.band)?;
    let alpha = if p.magnification == Magnification::Off { 0.0 } else { p.evm.alpha };

    let mut w = ctx.create("evm_series.csv")?;
    let mut text = String::from("timestamp_ms,channel,absorbance,bandpass,magnified\n");
    for c in 0..NUM_CHANNELS {
        let x = series.channel(c);
        let band = match p.magnification {
            Magnification::Causal => sosfilt_steady(&cascade, &x),
            _ => filtfilt(&cascade, &x)?,
        };
        let name = map.column_name(c);
        for ((t, v), b) in series.timestamps_ms().iter().zip(&x).zip(&band) {
            let _ = writeln!(text, "{t},{name},{v},{b},{}", v + alpha * b);
        }
    }
    w.write_all(text.as_bytes())
        .map_err(|e| data(format!("cannot write evm_series.csv: {e}")))?;
    flush(&mut w, "evm_series.csv")
}
