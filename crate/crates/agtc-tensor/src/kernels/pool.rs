//! Average pooling over the two spatial axes, no padding.

use crate::tensor::Tensor;
use crate::TensorError;

/// out = floor((in - pool) / stride) + 1 per axis.
pub fn avg_pool_forward(
    x: &Tensor,
    pool: (usize, usize),
    stride: (usize, usize),
) -> Result<Tensor, TensorError> {
    if x.rank() != 4 {
        return Err(TensorError::ShapeMismatch {
            op: "avg_pool",
            detail: format!("input must be rank 4, got {:?}", x.shape()),
        });
    }
    let (b, h, w, f) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    if pool.0 > h || pool.1 > w || pool.0 == 0 || pool.1 == 0 || stride.0 == 0 || stride.1 == 0 {
        return Err(TensorError::ShapeMismatch {
            op: "avg_pool",
            detail: format!("pool {pool:?} does not fit input ({h}, {w})"),
        });
    }
    let oh = (h - pool.0) / stride.0 + 1;
    let ow = (w - pool.1) / stride.1 + 1;
    let inv = 1.0 / (pool.0 * pool.1) as f64;

    let mut y = Tensor::zeros(&[b, oh, ow, f]);
    let xd = x.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for i in 0..oh {
            for j in 0..ow {
                let ybase = ((bi * oh + i) * ow + j) * f;
                for di in 0..pool.0 {
                    for dj in 0..pool.1 {
                        let xbase = ((bi * h + i * stride.0 + di) * w + j * stride.1 + dj) * f;
                        for ff in 0..f {
                            yd[ybase + ff] += xd[xbase + ff];
                        }
                    }
                }
                for ff in 0..f {
                    yd[ybase + ff] *= inv;
                }
            }
        }
    }
    Ok(y)
}

pub fn avg_pool_backward(
    x_shape: &[usize],
    gy: &Tensor,
    pool: (usize, usize),
    stride: (usize, usize),
) -> Tensor {
    let (b, h, w, f) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
    let oh = (h - pool.0) / stride.0 + 1;
    let ow = (w - pool.1) / stride.1 + 1;
    let inv = 1.0 / (pool.0 * pool.1) as f64;

    let mut gx = Tensor::zeros(x_shape);
    let gd = gy.data();
    let gxd = gx.data_mut();
    for bi in 0..b {
        for i in 0..oh {
            for j in 0..ow {
                let ybase = ((bi * oh + i) * ow + j) * f;
                for di in 0..pool.0 {
                    for dj in 0..pool.1 {
                        let xbase = ((bi * h + i * stride.0 + di) * w + j * stride.1 + dj) * f;
                        for ff in 0..f {
                            gxd[xbase + ff] += gd[ybase + ff] * inv;
                        }
                    }
                }
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_lengths_match_the_stack() {
        let x = Tensor::zeros(&[1, 1, 344, 1]);
        let y = avg_pool_forward(&x, (1, 4), (1, 2)).unwrap();
        assert_eq!(y.shape()[2], 171);
        let x = Tensor::zeros(&[1, 1, 171, 1]);
        let y = avg_pool_forward(&x, (1, 4), (1, 4)).unwrap();
        assert_eq!(y.shape()[2], 42);
        let x = Tensor::zeros(&[1, 1, 42, 1]);
        let y = avg_pool_forward(&x, (1, 4), (1, 4)).unwrap();
        assert_eq!(y.shape()[2], 10);
    }

    #[test]
    fn constant_input_stays_constant() {
        let x = Tensor::full(&[1, 1, 12, 3], 2.5);
        let y = avg_pool_forward(&x, (1, 4), (1, 2)).unwrap();
        assert!(y.data().iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn oversized_pool_errors() {
        let x = Tensor::zeros(&[1, 1, 3, 1]);
        assert!(avg_pool_forward(&x, (1, 4), (1, 4)).is_err());
    }
}
