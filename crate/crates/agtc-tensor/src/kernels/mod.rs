//! Pure forward/backward kernels behind the tape ops.
//!
//! Layout convention is channels-last: activations are (batch, height,
//! width, features) and kernels are (kh, kw, in_features, out_features).
//! All reductions run in deterministic sequential order.

mod conv;
mod graph;
mod linalg;
mod norm;
mod pool;
mod softmax;

pub use conv::{conv2d_backward, conv2d_forward, depthwise_backward, depthwise_forward};
pub use graph::{
    edge_weighted_sum_backward, edge_weighted_sum_forward, pairwise_add_backward,
    pairwise_add_forward,
};
pub use linalg::{
    linear_backward, linear_forward, matmul_backward, matmul_forward, transpose_last2,
};
pub use norm::{batch_norm_backward, batch_norm_forward, batch_stats};
pub use pool::{avg_pool_backward, avg_pool_forward};
pub use softmax::{softmax_backward, softmax_forward};

use crate::TensorError;

/// Spatial padding mode for convolutions.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Padding {
    /// No padding; kernel must fit inside the input.
    Valid,
    /// Zero padding so that out = ceil(in / stride); when the total padding
    /// is odd the extra zero goes on the trailing side.
    Same,
}

/// Resolved geometry for one spatial dimension.
#[derive(Copy, Clone, Debug)]
pub(crate) struct DimGeom {
    pub out: usize,
    pub pad_begin: usize,
}

pub(crate) fn resolve_dim(
    op: &'static str,
    input: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<DimGeom, TensorError> {
    if stride == 0 || kernel == 0 {
        return Err(TensorError::InvalidArgument {
            op,
            detail: "kernel and stride must be positive".into(),
        });
    }
    match padding {
        Padding::Valid => {
            if kernel > input {
                return Err(TensorError::ShapeMismatch {
                    op,
                    detail: format!("kernel {kernel} exceeds input extent {input} (valid padding)"),
                });
            }
            Ok(DimGeom { out: (input - kernel) / stride + 1, pad_begin: 0 })
        }
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Ok(DimGeom { out, pad_begin: total / 2 })
        }
    }
}
