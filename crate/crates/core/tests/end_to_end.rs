use hydrotrack_core::edge::{compile_model, infer, CompactModel, StreamConfig, StreamState};
use hydrotrack_core::forest::{predict, train_forest, ForestModel, ForestParams};
use hydrotrack_core::io::{read_frames_csv, write_frames_csv};
use hydrotrack_core::pipeline::{recording_features, Magnification, PipelineConfig};
use hydrotrack_core::spectra::ChannelMap;
use hydrotrack_core::synth::CohortConfig;

fn small_cohort() -> CohortConfig {
    let mut c = CohortConfig {
        n_subjects: 3,
        ..CohortConfig::default()
    };
    c.session.duration_s = 900.0;
    c
}

fn causal() -> PipelineConfig {
    PipelineConfig {
        magnification: Magnification::Causal,
        ..PipelineConfig::default()
    }
}

#[test]
fn streaming_replay_matches_offline_compact_inference() {
    let cohort = small_cohort().generate(11).unwrap();
    let config = causal();
    let (data, skipped) = cohort.dataset(&config).unwrap();
    assert_eq!(skipped, 0);
    let params = ForestParams {
        n_estimators: 10,
        ..ForestParams::default()
    };
    let model = train_forest(&data, &params, 11).unwrap();
    let compact = compile_model(&model).unwrap();

    let stream_config = StreamConfig {
        evm: config.evm,
        window: config.window,
    };
    let rec = &cohort.recordings[0];
    let profile = &cohort.profiles[&rec.subject_id];
    let offline = recording_features(&rec.frames, profile, &config).unwrap();
    let mut state = StreamState::new(&stream_config).unwrap();
    let outputs: Vec<_> = rec
        .frames
        .iter()
        .filter_map(|f| state.step(f, profile, &compact).unwrap())
        .collect();
    assert_eq!(outputs.len(), offline.len());
    for (out, row) in outputs.iter().zip(&offline) {
        assert_eq!(out.label, infer(&compact, &row.values).unwrap().label);
    }
}

#[test]
fn model_survives_json_and_binary_round_trips() {
    let cohort = small_cohort().generate(5).unwrap();
    let (data, _) = cohort.dataset(&PipelineConfig::default()).unwrap();
    let params = ForestParams {
        n_estimators: 8,
        ..ForestParams::default()
    };
    let model = train_forest(&data, &params, 5).unwrap();
    let parsed: ForestModel = serde_json::from_str(&model.to_json()).unwrap();
    assert_eq!(parsed, model);

    let compact = compile_model(&model).unwrap();
    let reloaded = CompactModel::from_bytes(compact.as_bytes().to_vec()).unwrap();
    assert_eq!(reloaded.as_bytes(), compact.as_bytes());
    for row in &data.rows {
        assert_eq!(
            infer(&reloaded, row).unwrap().label,
            predict(&model, row).unwrap().label
        );
    }
}

#[test]
fn frames_survive_csv_round_trip() {
    let cohort = small_cohort().generate(3).unwrap();
    let frames = &cohort.recordings[0].frames;
    let map = ChannelMap::default();
    let mut buf = Vec::new();
    write_frames_csv(&mut buf, frames, &map).unwrap();
    let back = read_frames_csv(buf.as_slice(), &map).unwrap();
    assert_eq!(&back, frames);
}
