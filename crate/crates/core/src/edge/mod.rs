//! Edge deployment: compact binary forest and streaming inference.

mod compact;
mod stream;

pub use compact::{
    audit_argmax, compile_audited, compile_model, infer, quantize_q15, ArgmaxAudit, CompactModel,
    FORMAT_VERSION, HEADER_LEN, LEAF_TAG, MAGIC, MAX_MODEL_BYTES, NODE_LEN, Q15_ONE,
};
pub use stream::{stream_step, MonoDeque, StreamConfig, StreamOutput, StreamState};

use crate::features::FeatureError;
use crate::forest::ForestError;
use crate::spectra::SpectraError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EdgeError {
    #[error("compiled model is {size} bytes, over the {limit} byte budget")]
    ModelTooLarge { size: usize, limit: usize },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("cannot compile model: {0}")]
    InvalidModel(String),
    #[error("feature version mismatch: engine {expected}, model {found}")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("model reads {expected} features, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("quantization flips the predicted class on {} training rows", rows.len())]
    ArgmaxFlip { rows: Vec<usize> },
    #[error("out-of-order frame: {got} ms does not follow {previous} ms")]
    OutOfOrderFrame { previous: i64, got: i64 },
    #[error("invalid stream configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

impl From<FeatureError> for EdgeError {
    fn from(e: FeatureError) -> Self {
        EdgeError::Config(e.to_string())
    }
}
