//! Parameter initialization.

use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Glorot (Xavier) uniform: i.i.d. on [-L, L] with L = sqrt(6/(fan_in+fan_out)).
pub fn glorot_uniform(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut RngStream,
) -> Tensor {
    assert!(fan_in > 0 && fan_out > 0, "fans must be positive");
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform(-limit, limit)).collect())
}

/// Fan-in/fan-out as computed from a kernel shape: the trailing two dims are
/// (in, out) channels, anything before them is receptive field.
pub fn fans_of(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
         0 => (1, 1),
        1 => (shape[0], shape[0]),
        2 => (shape[0], shape[1]),
        n => {
            let receptive: usize = shape[..n - 2].iter().product();
            (shape[n - 2] * receptive, shape[n - 1] * receptive)
        }
    }
}
