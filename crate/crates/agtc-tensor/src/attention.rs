//! Scaled dot-product multi-head attention, composed on the tape.

use crate::rng::RngStream;
use crate::tape::{Mode, Tape, Var};
use crate::tensor::Tensor;
use crate::TensorError;

/// Projection variables for one attention block, already registered on the
/// tape. Query/key/value projections are per head; the output projection is
/// shared across heads: (heads * value_dim) -> model dim.
pub struct MhaVars {
    pub wq: Vec<Var>,
    pub bq: Vec<Var>,
    pub wk: Vec<Var>,
    pub bk: Vec<Var>,
    pub wv: Vec<Var>,
    pub bv: Vec<Var>,
    pub wo: Var,
    pub bo: Var,
}

pub struct MhaOutput {
    pub out: Var,
    /// Per-head attention probabilities (B, T, T), captured before dropout.
    pub attn: Vec<Tensor>,
}

/// x is (B, T, D). Per head: project to key/value dims, scores = QK^T/sqrt(dk),
/// softmax over keys, dropout on the attention probabilities during training,
/// weighted sum of V; heads are concatenated and projected back to D.
pub fn multi_head_attention(
    tape: &mut Tape,
    x: Var,
    vars: &MhaVars,
    key_dim: usize,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut RngStream,
) -> Result<MhaOutput, TensorError> {
    if tape.value(x).rank() != 3 {
        return Err(TensorError::ShapeMismatch {
            op: "multi_head_attention",
            detail: format!("input must be (B, T, D), got {:?}", tape.value(x).shape()),
        });
    }
    let heads = vars.wq.len();
    if heads == 0 || vars.wk.len() != heads || vars.wv.len() != heads {
        return Err(TensorError::InvalidArgument {
            op: "multi_head_attention",
            detail: "projection lists must be non-empty and equally sized".into(),
        });
    }
    let scale = 1.0 / (key_dim as f64).sqrt();

    let mut contexts = Vec::with_capacity(heads);
    let mut attn = Vec::with_capacity(heads);
    for h in 0..heads {
        let q = tape.linear(x, vars.wq[h], Some(vars.bq[h]))?;
        let k = tape.linear(x, vars.wk[h], Some(vars.bk[h]))?;
        let v = tape.linear(x, vars.wv[h], Some(vars.bv[h]))?;
        let kt = tape.transpose_last2(k)?;
        let raw = tape.matmul(q, kt)?;
        let scores = tape.scale(raw, scale);
        let probs = tape.softmax(scores, 2)?;
        attn.push(tape.value(probs).clone());
        let dropped = tape.dropout(probs, dropout_rate, mode, rng)?;
        contexts.push(tape.matmul(dropped, v)?);
    }
    let merged = tape.concat_last(&contexts)?;
    let out = tape.linear(merged, vars.wo, Some(vars.bo))?;
    Ok(MhaOutput { out, attn })
}
