//! Dense linear maps and batched matrix products.

use crate::tensor::Tensor;
use crate::TensorError;

/// y = x · w (+ b) over the trailing axis; x (..., I), w (I, O), b (O).
pub fn linear_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor, TensorError> {
    let i = *x.shape().last().ok_or_else(|| TensorError::ShapeMismatch {
        op: "linear",
        detail: "scalar input".into(),
    })?;
    if w.rank() != 2 || w.shape()[0] != i {
        return Err(TensorError::ShapeMismatch {
            op: "linear",
            detail: format!("weight {:?} incompatible with input {:?}", w.shape(), x.shape()),
        });
    }
    let o = w.shape()[1];
    if let Some(b) = b {
        if b.shape() != [o] {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                detail: format!("bias {:?} incompatible with {o} outputs", b.shape()),
            });
        }
    }
    let rows = x.numel() / i;
    let mut yshape = x.shape().to_vec();
    *yshape.last_mut().unwrap() = o;
    let mut y = Tensor::zeros(&yshape);
    let xd = x.data();
    let wd = w.data();
    let yd = y.data_mut();
    for r in 0..rows {
        for ii in 0..i {
            let xv = xd[r * i + ii];
            if xv == 0.0 {
                continue;
            }
            let wrow = ii * o;
            for oo in 0..o {
                yd[r * o + oo] += xv * wd[wrow + oo];
            }
        }
        if let Some(b) = b {
            for oo in 0..o {
                yd[r * o + oo] += b.data()[oo];
            }
        }
    }
    Ok(y)
}

pub fn linear_backward(
    x: &Tensor,
    w: &Tensor,
    gy: &Tensor,
    need_gx: bool,
    need_gw: bool,
    need_gb: bool,
) -> (Option<Tensor>, Option<Tensor>, Option<Tensor>) {
    let i = *x.shape().last().unwrap();
    let o = w.shape()[1];
    let rows = x.numel() / i;
    let xd = x.data();
    let wd = w.data();
    let gd = gy.data();

    let mut gx = need_gx.then(|| Tensor::zeros(x.shape()));
    let mut gw = need_gw.then(|| Tensor::zeros(w.shape()));
    let mut gb = need_gb.then(|| Tensor::zeros(&[o]));
    for r in 0..rows {
        for oo in 0..o {
            let g = gd[r * o + oo];
            if g == 0.0 {
                continue;
            }
            if let Some(gb) = gb.as_mut() {
                gb.data_mut()[oo] += g;
            }
            for ii in 0..i {
                if let Some(gx) = gx.as_mut() {
                    gx.data_mut()[r * i + ii] += g * wd[ii * o + oo];
                }
                if let Some(gw) = gw.as_mut() {
                    gw.data_mut()[ii * o + oo] += g * xd[r * i + ii];
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Batched product of a (..., M, K) and b (..., K, N) with equal leading dims.
pub fn matmul_forward(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let ra = a.rank();
    let rb = b.rank();
    if ra < 2 || rb < 2 || ra != rb || a.shape()[..ra - 2] != b.shape()[..rb - 2] {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            detail: format!("incompatible batch dims {:?} x {:?}", a.shape(), b.shape()),
        });
    }
    let (m, k) = (a.shape()[ra - 2], a.shape()[ra - 1]);
    let (kb, n) = (b.shape()[rb - 2], b.shape()[rb - 1]);
    if k != kb {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            detail: format!("inner dims differ: {:?} x {:?}", a.shape(), b.shape()),
        });
    }
    let batch: usize = a.shape()[..ra - 2].iter().product();
    let mut yshape = a.shape().to_vec();
    yshape[ra - 2] = m;
    yshape[ra - 1] = n;
    let mut y = Tensor::zeros(&yshape);
    let ad = a.data();
    let bd = b.data();
    let yd = y.data_mut();
    for t in 0..batch {
        let abase = t * m * k;
        let bbase = t * k * n;
        let ybase = t * m * n;
        for mi in 0..m {
            for ki in 0..k {
                let av = ad[abase + mi * k + ki];
                if av == 0.0 {
                    continue;
                }
                for ni in 0..n {
                    yd[ybase + mi * n + ni] += av * bd[bbase + ki * n + ni];
                }
            }
        }
    }
    Ok(y)
}

pub fn matmul_backward(a: &Tensor, b: &Tensor, gy: &Tensor) -> (Tensor, Tensor) {
    let ra = a.rank();
    let (m, k) = (a.shape()[ra - 2], a.shape()[ra - 1]);
    let n = b.shape()[ra - 1];
    let batch: usize = a.shape()[..ra - 2].iter().product();
    let mut ga = Tensor::zeros(a.shape());
    let mut gb = Tensor::zeros(b.shape());
    let ad = a.data();
    let bd = b.data();
    let gd = gy.data();
    for t in 0..batch {
        let abase = t * m * k;
        let bbase = t * k * n;
        let ybase = t * m * n;
        for mi in 0..m {
            for ni in 0..n {
                let g = gd[ybase + mi * n + ni];
                if g == 0.0 {
                    continue;
                }
                for ki in 0..k {
                    ga.data_mut()[abase + mi * k + ki] += g * bd[bbase + ki * n + ni];
                    gb.data_mut()[bbase + ki * n + ni] += g * ad[abase + mi * k + ki];
                }
            }
        }
    }
    (ga, gb)
}

/// Swap the two trailing axes.
pub fn transpose_last2(x: &Tensor) -> Result<Tensor, TensorError> {
    let r = x.rank();
    if r < 2 {
        return Err(TensorError::ShapeMismatch {
            op: "transpose",
            detail: format!("need rank >= 2, got {:?}", x.shape()),
        });
    }
    let (m, n) = (x.shape()[r - 2], x.shape()[r - 1]);
    let batch: usize = x.shape()[..r - 2].iter().product();
    let mut yshape = x.shape().to_vec();
    yshape[r - 2] = n;
    yshape[r - 1] = m;
    let mut y = Tensor::zeros(&yshape);
    let xd = x.data();
    let yd = y.data_mut();
    for t in 0..batch {
        for mi in 0..m {
            for ni in 0..n {
                yd[t * m * n + ni * m + mi] = xd[t * m * n + mi * n + ni];
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_is_identity() {
        let x = Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.set(&[i, i], 1.0);
        }
        let y = linear_forward(&x, &w, None).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn matmul_matches_hand_product() {
        let a = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::new(&[1, 2, 2], vec![5.0, 6.0, 7.0, 8.0]);
        let y = matmul_forward(&a, &b).unwrap();
        assert_eq!(y.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transpose_round_trips() {
        let x = Tensor::new(&[2, 2, 3], (0..12).map(|v| v as f64).collect());
        let t = transpose_last2(&x).unwrap();
        let back = transpose_last2(&t).unwrap();
        assert_eq!(back.data(), x.data());
        assert_eq!(t.shape(), &[2, 3, 2]);
    }
}
