//! Batch normalization over all axes except the trailing feature axis.

use crate::tensor::Tensor;

/// Per-feature mean and biased variance across every non-feature axis.
pub fn batch_stats(x: &Tensor) -> (Tensor, Tensor) {
    let f = *x.shape().last().expect("non-scalar input");
    let rows = x.numel() / f;
    let mut mean = vec![0.0; f];
    let xd = x.data();
    for r in 0..rows {
        for (ff, m) in mean.iter_mut().enumerate() {
            *m += xd[r * f + ff];
        }
    }
    for m in &mut mean {
        *m /= rows as f64;
    }
    let mut var = vec![0.0; f];
    for r in 0..rows {
        for ff in 0..f {
            let d = xd[r * f + ff] - mean[ff];
            var[ff] += d * d;
        }
    }
    for v in &mut var {
        *v /= rows as f64;
    }
    (Tensor::new(&[f], mean), Tensor::new(&[f], var))
}

/// Normalize with the given statistics and apply the per-feature affine.
pub fn batch_norm_forward(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mean: &Tensor,
    var: &Tensor,
    eps: f64,
) -> Tensor {
    let f = *x.shape().last().unwrap();
    let rows = x.numel() / f;
    let inv_std: Vec<f64> = var.data().iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
    let mut y = Tensor::zeros(x.shape());
    let xd = x.data();
    let yd = y.data_mut();
    let (g, b, m) = (gamma.data(), beta.data(), mean.data());
    for r in 0..rows {
        for ff in 0..f {
            yd[r * f + ff] = g[ff] * (xd[r * f + ff] - m[ff]) * inv_std[ff] + b[ff];
        }
    }
    y
}

/// Gradients w.r.t. x, gamma, beta.
///
/// With `stats_from_batch` the captured mean/variance are functions of x
/// (training mode), so the normalization terms enter the input gradient;
/// otherwise they are constants (inference with running statistics).
#[allow(clippy::too_many_arguments)]
pub fn batch_norm_backward(
    x: &Tensor,
    gamma: &Tensor,
    mean: &Tensor,
    var: &Tensor,
    eps: f64,
    gy: &Tensor,
    stats_from_batch: bool,
    need_gx: bool,
) -> (Option<Tensor>, Tensor, Tensor) {
    let f = *x.shape().last().unwrap();
    let rows = x.numel() / f;
    let inv_std: Vec<f64> = var.data().iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
    let xd = x.data();
    let gd = gy.data();
    let m = mean.data();

    let mut gbeta = vec![0.0; f];
    let mut ggamma = vec![0.0; f];
    for r in 0..rows {
        for ff in 0..f {
            let xhat = (xd[r * f + ff] - m[ff]) * inv_std[ff];
            gbeta[ff] += gd[r * f + ff];
            ggamma[ff] += gd[r * f + ff] * xhat;
        }
    }

    let gx = need_gx.then(|| {
        let g = gamma.data();
        let mut gx = Tensor::zeros(x.shape());
        let gxd = gx.data_mut();
        if stats_from_batch {
            let n = rows as f64;
            for r in 0..rows {
                for ff in 0..f {
                    let xhat = (xd[r * f + ff] - m[ff]) * inv_std[ff];
                    gxd[r * f + ff] = g[ff] * inv_std[ff]
                        * (gd[r * f + ff] - gbeta[ff] / n - xhat * ggamma[ff] / n);
                }
            }
        } else {
            for r in 0..rows {
                for ff in 0..f {
                    gxd[r * f + ff] = gd[r * f + ff] * g[ff] * inv_std[ff];
                }
            }
        }
        gx
    });

    (gx, Tensor::new(&[f], ggamma), Tensor::new(&[f], gbeta))
}
