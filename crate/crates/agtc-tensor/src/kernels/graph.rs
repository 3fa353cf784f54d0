//! Kernels specific to per-node attention over a channel graph.

use crate::tensor::Tensor;
use crate::TensorError;

/// Broadcast node scores into edge scores:
/// e[b,i,j,t] = src[b,i,t,0] + dst[b,j,t,0].
pub fn pairwise_add_forward(src: &Tensor, dst: &Tensor) -> Result<Tensor, TensorError> {
    if src.rank() != 4 || src.shape() != dst.shape() || src.shape()[3] != 1 {
        return Err(TensorError::ShapeMismatch {
            op: "pairwise_add",
            detail: format!("need matching (B,C,T,1) inputs, got {:?} and {:?}", src.shape(), dst.shape()),
        });
    }
    let (b, c, t) = (src.shape()[0], src.shape()[1], src.shape()[2]);
    let mut e = Tensor::zeros(&[b, c, c, t]);
    let sd = src.data();
    let dd = dst.data();
    let ed = e.data_mut();
    for bi in 0..b {
        for i in 0..c {
            for j in 0..c {
                let ebase = ((bi * c + i) * c + j) * t;
                let sbase = (bi * c + i) * t;
                let dbase = (bi * c + j) * t;
                for tt in 0..t {
                    ed[ebase + tt] = sd[sbase + tt] + dd[dbase + tt];
                }
            }
        }
    }
    Ok(e)
}

pub fn pairwise_add_backward(ge: &Tensor) -> (Tensor, Tensor) {
    let (b, c, t) = (ge.shape()[0], ge.shape()[1], ge.shape()[3]);
    let mut gsrc = Tensor::zeros(&[b, c, t, 1]);
    let mut gdst = Tensor::zeros(&[b, c, t, 1]);
    let gd = ge.data();
    for bi in 0..b {
        for i in 0..c {
            for j in 0..c {
                let ebase = ((bi * c + i) * c + j) * t;
                for tt in 0..t {
                    let g = gd[ebase + tt];
                    gsrc.data_mut()[(bi * c + i) * t + tt] += g;
                    gdst.data_mut()[(bi * c + j) * t + tt] += g;
                }
            }
        }
    }
    (gsrc, gdst)
}

/// Attention-weighted neighborhood sum:
/// m[b,i,t,f] = sum_j alpha[b,i,j,t] * v[b,j,t,f].
pub fn edge_weighted_sum_forward(alpha: &Tensor, v: &Tensor) -> Result<Tensor, TensorError> {
    if alpha.rank() != 4 || v.rank() != 4 {
        return Err(TensorError::ShapeMismatch {
            op: "edge_weighted_sum",
            detail: "both inputs must be rank 4".into(),
        });
    }
    let (b, c, c2, t) = (alpha.shape()[0], alpha.shape()[1], alpha.shape()[2], alpha.shape()[3]);
    let f = v.shape()[3];
    if c != c2 || v.shape()[0] != b || v.shape()[1] != c || v.shape()[2] != t {
        return Err(TensorError::ShapeMismatch {
            op: "edge_weighted_sum",
            detail: format!("alpha {:?} incompatible with values {:?}", alpha.shape(), v.shape()),
        });
    }
    let mut m = Tensor::zeros(&[b, c, t, f]);
    let ad = alpha.data();
    let vd = v.data();
    let md = m.data_mut();
    for bi in 0..b {
        for i in 0..c {
            for j in 0..c {
                let abase = ((bi * c + i) * c + j) * t;
                for tt in 0..t {
                    let a = ad[abase + tt];
                    if a == 0.0 {
                        continue;
                    }
                    let vbase = ((bi * c + j) * t + tt) * f;
                    let mbase = ((bi * c + i) * t + tt) * f;
                    for ff in 0..f {
                        md[mbase + ff] += a * vd[vbase + ff];
                    }
                }
            }
        }
    }
    Ok(m)
}

pub fn edge_weighted_sum_backward(
    alpha: &Tensor,
    v: &Tensor,
    gm: &Tensor,
) -> (Tensor, Tensor) {
    let (b, c, t) = (alpha.shape()[0], alpha.shape()[1], alpha.shape()[3]);
    let f = v.shape()[3];
    let mut galpha = Tensor::zeros(alpha.shape());
    let mut gv = Tensor::zeros(v.shape());
    let ad = alpha.data();
    let vd = v.data();
    let gd = gm.data();
    for bi in 0..b {
        for i in 0..c {
            for j in 0..c {
                let abase = ((bi * c + i) * c + j) * t;
                for tt in 0..t {
                    let vbase = ((bi * c + j) * t + tt) * f;
                    let mbase = ((bi * c + i) * t + tt) * f;
                    let mut acc = 0.0;
                    let a = ad[abase + tt];
                    for ff in 0..f {
                        let g = gd[mbase + ff];
                        acc += g * vd[vbase + ff];
                        if a != 0.0 {
                            gv.data_mut()[vbase + ff] += a * g;
                        }
                    }
                    galpha.data_mut()[abase + tt] = acc;
                }
            }
        }
    }
    (galpha, gv)
}
