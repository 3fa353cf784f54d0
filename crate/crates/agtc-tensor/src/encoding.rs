//! Sinusoidal positional encoding.

use crate::tensor::Tensor;
use crate::TensorError;

/// PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(t / 10000^(2i/d)).
/// `d` must be even.
pub fn positional_encoding(t_len: usize, d: usize) -> Result<Tensor, TensorError> {
    if !d.is_multiple_of(2) {
        return Err(TensorError::InvalidArgument {
            op: "positional_encoding",
            detail: format!("feature dim {d} must be even"),
        });
    }
    let mut pe = Tensor::zeros(&[t_len, d]);
    for t in 0..t_len {
        for i in 0..d / 2 {
            let rate = (t as f64) / 10000_f64.powf(2.0 * i as f64 / d as f64);
            pe.set(&[t, 2 * i], rate.sin());
            pe.set(&[t, 2 * i + 1], rate.cos());
        }
    }
    Ok(pe)
}
