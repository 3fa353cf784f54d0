//! The attentive graph-temporal model stack: channel-wise temporal
//! convolution, graph-attentive message passing over the electrode
//! adjacency, learnable spatial pooling, global temporal convolution,
//! a positional/attention context block, and a softmax classifier.

mod config;
mod forward;
mod state;
mod weights;

pub use config::ModelConfig;
pub use forward::{EdgeAttention, ForwardPass};
pub use state::{param_count, BnState, ModelState, ParamCountReport, BN_EPS, BN_MOMENTUM};
pub use weights::{load_weights, read_weights_config, save_weights};

use agtc_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("adjacency graph has {found} channels, model expects {expected}")]
    AdjacencyMismatch { expected: usize, found: usize },
    #[error("bad input batch: expected (B, {}, {}, {}), got {found:?}", expected[1], expected[2], expected[3])]
    BadInput { expected: Vec<usize>, found: Vec<usize> },
    #[error("{stage} stage failed: {source}")]
    Stage { stage: &'static str, source: TensorError },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a weights file (bad magic)")]
    BadMagic,
    #[error("unsupported weights format version {0}")]
    BadVersion(u16),
    #[error("corrupt weights file: {detail}")]
    Corrupt { detail: String },
    #[error("weights file contains unknown tensor '{name}'")]
    UnknownTensor { name: String },
    #[error("weights file is missing tensors: {names:?}")]
    MissingTensors { names: Vec<String> },
    #[error("tensor '{name}' has shape {found:?}, expected {expected:?}")]
    TensorShape { name: String, expected: Vec<usize>, found: Vec<usize> },
}
