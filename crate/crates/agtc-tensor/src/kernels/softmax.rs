//! Numerically stable softmax along one axis, with optional masking.

use crate::tensor::{strides_of, Tensor};
use crate::TensorError;

/// exp-normalize along `axis` after max subtraction. With a mask
/// (entries above 0.5 kept, broadcastable to x's shape), masked positions
/// get exactly probability 0; normalization runs over unmasked ones only.
/// A fully masked line is an error: the quotient would be 0/0.
pub fn softmax_forward(
    x: &Tensor,
    axis: usize,
    mask: Option<&Tensor>,
) -> Result<Tensor, TensorError> {
    let rank = x.rank();
    if axis >= rank {
        return Err(TensorError::InvalidArgument {
            op: "softmax",
            detail: format!("axis {axis} out of range for rank {rank}"),
        });
    }
    let mask_strides = match mask {
        None => None,
        Some(m) => {
            if m.rank() != rank {
                return Err(TensorError::ShapeMismatch {
                    op: "softmax",
                    detail: format!("mask rank {} != input rank {}", m.rank(), rank),
                });
            }
            let full = strides_of(m.shape());
            let mut s = vec![0usize; rank];
            for d in 0..rank {
                if m.shape()[d] == x.shape()[d] {
                    s[d] = full[d];
                } else if m.shape()[d] != 1 {
                    return Err(TensorError::ShapeMismatch {
                        op: "softmax",
                        detail: format!(
                            "mask {:?} not broadcastable to {:?}",
                            m.shape(),
                            x.shape()
                        ),
                    });
                }
            }
            Some(s)
        }
    };

    let len = x.shape()[axis];
    let inner: usize = x.shape()[axis + 1..].iter().product();
    let outer: usize = x.shape()[..axis].iter().product();
    let xd = x.data();
    let mut y = Tensor::zeros(x.shape());
    let yd = y.data_mut();

    let mut index = vec![0usize; rank];
    for o in 0..outer {
        for i in 0..inner {
            // multi-index of the line's first element, for mask lookups
            let mask_base = mask_strides.as_ref().map(|ms| {
                let mut rem = o;
                for d in (0..axis).rev() {
                    index[d] = rem % x.shape()[d];
                    rem /= x.shape()[d];
                }
                index[axis] = 0;
                let mut rem = i;
                for d in (axis + 1..rank).rev() {
                    index[d] = rem % x.shape()[d];
                    rem /= x.shape()[d];
                }
                index.iter().zip(ms).map(|(ix, st)| ix * st).sum::<usize>()
            });
            let keep = |j: usize| -> bool {
                match (&mask_base, mask) {
                    (Some(base), Some(m)) => {
                        m.data()[base + j * mask_strides.as_ref().unwrap()[axis]] > 0.5
                    }
                    _ => true,
                }
            };

            let at = |j: usize| xd[(o * len + j) * inner + i];
            let mut maxv = f64::NEG_INFINITY;
            for j in 0..len {
                if keep(j) {
                    maxv = maxv.max(at(j));
                }
            }
            if maxv == f64::NEG_INFINITY {
                return Err(TensorError::InvalidArgument {
                    op: "softmax",
                    detail: "all positions masked in a normalization line".into(),
                });
            }
            let mut denom = 0.0;
            for j in 0..len {
                if keep(j) {
                    denom += (at(j) - maxv).exp();
                }
            }
            for j in 0..len {
                yd[(o * len + j) * inner + i] =
                    if keep(j) { (at(j) - maxv).exp() / denom } else { 0.0 };
            }
        }
    }
    Ok(y)
}

/// gx = y * (gy - sum(gy * y, axis)). Masked positions have y = 0 and
/// therefore receive exactly zero gradient.
pub fn softmax_backward(y: &Tensor, gy: &Tensor, axis: usize) -> Tensor {
    let len = y.shape()[axis];
    let inner: usize = y.shape()[axis + 1..].iter().product();
    let outer: usize = y.shape()[..axis].iter().product();
    let yd = y.data();
    let gd = gy.data();
    let mut gx = Tensor::zeros(y.shape());
    let gxd = gx.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let mut dot = 0.0;
            for j in 0..len {
                let p = (o * len + j) * inner + i;
                dot += gd[p] * yd[p];
            }
            for j in 0..len {
                let p = (o * len + j) * inner + i;
                gxd[p] = yd[p] * (gd[p] - dot);
            }
        }
    }
    gx
}
