//! Dense double-precision tensors with reverse-mode gradients, covering
//! exactly the layer set the AGTC model stack needs: temporal/depthwise/
//! separable convolution, batch normalization, SELU/PReLU, average pooling,
//! dropout, linear, softmax, sinusoidal positional encoding, multi-head
//! attention, Glorot initialization and norm constraints.
//!
//! No GPU, no graph caching, no mixed precision: the tape is rebuilt per
//! forward pass and every reduction is sequential, so identical seeds give
//! bit-identical results.

mod attention;
mod encoding;
pub mod gradcheck;
mod init;
pub mod kernels;
mod params;
mod rng;
mod tape;
mod tensor;

pub use attention::{multi_head_attention, MhaOutput, MhaVars};
pub use encoding::positional_encoding;
pub use init::{fans_of, glorot_uniform};
pub use kernels::Padding;
pub use params::{apply_constraints, Constraint, LayerParam};
pub use rng::RngStream;
pub use tape::{Grads, Mode, Tape, Var, SELU_ALPHA, SELU_LAMBDA};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("invalid argument in {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
}
