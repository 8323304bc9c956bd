use hydrotrack_core::dsp::DspError;
use hydrotrack_core::edge::EdgeError;
use hydrotrack_core::features::FeatureError;
use hydrotrack_core::forest::ForestError;
use hydrotrack_core::pipeline::PipelineError;
use hydrotrack_core::spectra::SpectraError;
use hydrotrack_core::synth::SynthError;

/// Failure classes with stable process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation error",
            CliError::Data(_) => "data error",
            CliError::Internal(_) => "internal error",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn data(msg: impl std::fmt::Display) -> CliError {
    CliError::Data(msg.to_string())
}

pub fn validation(msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(msg.to_string())
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        data(e)
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        match e {
            DspError::InvalidBand(_) | DspError::InvalidParam(_) => validation(e),
            _ => data(e),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::InvalidWindow(_) => validation(e),
            _ => data(e),
        }
    }
}

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::InvalidParams(_)
            | ForestError::InvalidFolds { .. }
            | ForestError::TooFewGroups { .. } => validation(e),
            _ => data(e),
        }
    }
}

impl From<EdgeError> for CliError {
    fn from(e: EdgeError) -> Self {
        match e {
            EdgeError::ModelTooLarge { .. } | EdgeError::Config(_) => validation(e),
            EdgeError::Forest(f) => f.into(),
            _ => data(e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) => validation(e),
            _ => data(e),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Spectra(e) => e.into(),
            PipelineError::Dsp(e) => e.into(),
            PipelineError::Feature(e) => e.into(),
            PipelineError::MissingProfile(_) => data(e),
        }
    }
}
