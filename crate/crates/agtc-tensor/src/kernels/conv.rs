//! 2-D cross-correlation (standard and depthwise).

use super::{resolve_dim, Padding};
use crate::tensor::Tensor;
use crate::TensorError;

fn check_rank4(op: &'static str, t: &Tensor, what: &str) -> Result<(), TensorError> {
    if t.rank() != 4 {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("{what} must be rank 4, got {:?}", t.shape()),
        });
    }
    Ok(())
}

/// Cross-correlation of x (B,H,W,Fi) with kernel (kh,kw,Fi,Fo).
pub fn conv2d_forward(
    x: &Tensor,
    k: &Tensor,
    stride: (usize, usize),
    padding: Padding,
) -> Result<Tensor, TensorError> {
    check_rank4("conv2d", x, "input")?;
    check_rank4("conv2d", k, "kernel")?;
    let (b, h, w, fi) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (kh, kw, kfi, fo) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
    if kfi != fi {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("kernel expects {kfi} input features, input has {fi}"),
        });
    }
    let gh = resolve_dim("conv2d", h, kh, stride.0, padding)?;
    let gw = resolve_dim("conv2d", w, kw, stride.1, padding)?;

    let mut y = Tensor::zeros(&[b, gh.out, gw.out, fo]);
    let xd = x.data();
    let kd = k.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for oh in 0..gh.out {
            for ow in 0..gw.out {
                let ybase = ((bi * gh.out + oh) * gw.out + ow) * fo;
                for dh in 0..kh {
                    let ih = (oh * stride.0 + dh) as isize - gh.pad_begin as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    for dw in 0..kw {
                        let iw = (ow * stride.1 + dw) as isize - gw.pad_begin as isize;
                        if iw < 0 || iw as usize >= w {
                            continue;
                        }
                        let xbase = ((bi * h + ih as usize) * w + iw as usize) * fi;
                        let kbase = (dh * kw + dw) * fi * fo;
                        for f_in in 0..fi {
                            let xv = xd[xbase + f_in];
                            if xv == 0.0 {
                                continue;
                            }
                            let krow = kbase + f_in * fo;
                            for f_out in 0..fo {
                                yd[ybase + f_out] += xv * kd[krow + f_out];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Gradients of [`conv2d_forward`] w.r.t. input and kernel.
pub fn conv2d_backward(
    x: &Tensor,
    k: &Tensor,
    gy: &Tensor,
    stride: (usize, usize),
    padding: Padding,
    need_gx: bool,
    need_gk: bool,
) -> (Option<Tensor>, Option<Tensor>) {
    let (b, h, w, fi) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (kh, kw, _, fo) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
    let gh = resolve_dim("conv2d", h, kh, stride.0, padding).expect("checked in forward");
    let gw = resolve_dim("conv2d", w, kw, stride.1, padding).expect("checked in forward");

    let mut gx = need_gx.then(|| Tensor::zeros(x.shape()));
    let mut gk = need_gk.then(|| Tensor::zeros(k.shape()));
    let xd = x.data();
    let kd = k.data();
    let gyd = gy.data();
    for bi in 0..b {
        for oh in 0..gh.out {
            for ow in 0..gw.out {
                let ybase = ((bi * gh.out + oh) * gw.out + ow) * fo;
                for dh in 0..kh {
                    let ih = (oh * stride.0 + dh) as isize - gh.pad_begin as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    for dw in 0..kw {
                        let iw = (ow * stride.1 + dw) as isize - gw.pad_begin as isize;
                        if iw < 0 || iw as usize >= w {
                            continue;
                        }
                        let xbase = ((bi * h + ih as usize) * w + iw as usize) * fi;
                        let kbase = (dh * kw + dw) * fi * fo;
                        for f_in in 0..fi {
                            let krow = kbase + f_in * fo;
                            let mut acc = 0.0;
                            for f_out in 0..fo {
                                let g = gyd[ybase + f_out];
                                acc += g * kd[krow + f_out];
                                if let Some(gk) = gk.as_mut() {
                                    gk.data_mut()[krow + f_out] += g * xd[xbase + f_in];
                                }
                            }
                            if let Some(gx) = gx.as_mut() {
                                gx.data_mut()[xbase + f_in] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
    (gx, gk)
}

/// Depthwise cross-correlation: kernel (kh,kw,Fi,depth), output feature
/// `fi * depth + d` comes from input feature `fi` and multiplier `d`.
pub fn depthwise_forward(
    x: &Tensor,
    k: &Tensor,
    stride: (usize, usize),
    padding: Padding,
) -> Result<Tensor, TensorError> {
    check_rank4("depthwise_conv2d", x, "input")?;
    check_rank4("depthwise_conv2d", k, "kernel")?;
    let (b, h, w, fi) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (kh, kw, kfi, depth) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
    if kfi != fi {
        return Err(TensorError::ShapeMismatch {
            op: "depthwise_conv2d",
            detail: format!("kernel expects {kfi} input features, input has {fi}"),
        });
    }
    let gh = resolve_dim("depthwise_conv2d", h, kh, stride.0, padding)?;
    let gw = resolve_dim("depthwise_conv2d", w, kw, stride.1, padding)?;
    let fo = fi * depth;

    let mut y = Tensor::zeros(&[b, gh.out, gw.out, fo]);
    let xd = x.data();
    let kd = k.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for oh in 0..gh.out {
            for ow in 0..gw.out {
                let ybase = ((bi * gh.out + oh) * gw.out + ow) * fo;
                for dh in 0..kh {
                    let ih = (oh * stride.0 + dh) as isize - gh.pad_begin as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    for dw in 0..kw {
                        let iw = (ow * stride.1 + dw) as isize - gw.pad_begin as isize;
                        if iw < 0 || iw as usize >= w {
                            continue;
                        }
                        let xbase = ((bi * h + ih as usize) * w + iw as usize) * fi;
                        let kbase = (dh * kw + dw) * fi * depth;
                        for f_in in 0..fi {
                            let xv = xd[xbase + f_in];
                            if xv == 0.0 {
                                continue;
                            }
                            for d in 0..depth {
                                yd[ybase + f_in * depth + d] += xv * kd[kbase + f_in * depth + d];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

pub fn depthwise_backward(
    x: &Tensor,
    k: &Tensor,
    gy: &Tensor,
    stride: (usize, usize),
    padding: Padding,
    need_gx: bool,
    need_gk: bool,
) -> (Option<Tensor>, Option<Tensor>) {
    let (b, h, w, fi) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (kh, kw, _, depth) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
    let gh = resolve_dim("depthwise_conv2d", h, kh, stride.0, padding).expect("checked");
    let gw = resolve_dim("depthwise_conv2d", w, kw, stride.1, padding).expect("checked");
    let fo = fi * depth;

    let mut gx = need_gx.then(|| Tensor::zeros(x.shape()));
    let mut gk = need_gk.then(|| Tensor::zeros(k.shape()));
    let xd = x.data();
    let kd = k.data();
    let gyd = gy.data();
    for bi in 0..b {
        for oh in 0..gh.out {
            for ow in 0..gw.out {
                let ybase = ((bi * gh.out + oh) * gw.out + ow) * fo;
                for dh in 0..kh {
                    let ih = (oh * stride.0 + dh) as isize - gh.pad_begin as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    for dw in 0..kw {
                        let iw = (ow * stride.1 + dw) as isize - gw.pad_begin as isize;
                        if iw < 0 || iw as usize >= w {
                            continue;
                        }
                        let xbase = ((bi * h + ih as usize) * w + iw as usize) * fi;
                        let kbase = (dh * kw + dw) * fi * depth;
                        for f_in in 0..fi {
                            let mut acc = 0.0;
                            for d in 0..depth {
                                let g = gyd[ybase + f_in * depth + d];
                                acc += g * kd[kbase + f_in * depth + d];
                                if let Some(gk) = gk.as_mut() {
                                    gk.data_mut()[kbase + f_in * depth + d] +=
                                        g * xd[xbase + f_in];
                                }
                            }
                            if let Some(gx) = gx.as_mut() {
                                gx.data_mut()[xbase + f_in] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
    (gx, gk)
}
