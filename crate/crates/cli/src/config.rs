use std::path::Path;

use hydrotrack_core::forest::ForestParams;
use hydrotrack_core::pipeline::PipelineConfig;
use hydrotrack_core::synth::{CohortConfig, SolutionConfig};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub folds: usize,
    /// Keep each subject's windows in a single fold.
    pub grouped: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 6,
            grouped: true,
        }
    }
}

/// Every tunable of every subcommand. Missing keys take defaults; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub cohort: CohortConfig,
    pub solution: SolutionConfig,
    pub pipeline: PipelineConfig,
    pub forest: ForestParams,
    pub cv: CvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            cohort: CohortConfig::default(),
            solution: SolutionConfig::default(),
            pipeline: PipelineConfig::default(),
            forest: ForestParams::default(),
            cv: CvConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| validation(format!("invalid config {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset(name: &str) -> RunConfig {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name);
        RunConfig::load(Some(&path)).unwrap()
    }

    #[test]
    fn default_preset_is_the_default() {
        assert_eq!(preset("default.json"), RunConfig::default());
    }

    #[test]
    fn chance_preset_zeroes_sensitivity() {
        let expected = RunConfig {
            cohort: CohortConfig::chance(),
            ..RunConfig::default()
        };
        assert_eq!(preset("chance.json"), expected);
    }

    #[test]
    fn partial_config_takes_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 7, "forest": {"n_estimators": 3}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.forest.n_estimators, 3);
        assert_eq!(c.forest.max_depth, ForestParams::default().max_depth);
        assert_eq!(c.cohort, CohortConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 7}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"forest": {"depth": 3}}"#).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::default();
        assert_eq!(serde_json::from_str::<RunConfig>(&c.to_json()).unwrap(), c);
    }
}
