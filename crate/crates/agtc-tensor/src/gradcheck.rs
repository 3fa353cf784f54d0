//! Central finite-difference verification of tape gradients.
//!
//! The scalar objective is a fixed random linear functional of the graph
//! output, so the analytic gradient is one backward pass and the numeric
//! gradient is two forward passes per perturbed element. Builders must be
//! deterministic: reseed any RNG inside the closure so dropout masks are
//! frozen across evaluations.

use crate::rng::RngStream;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::TensorError;

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_err: f64,
    pub worst_input: usize,
    pub worst_element: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub elements_checked: usize,
}

/// |a - n| / max(|a|, |n|, 1): relative error with a unit floor so that
/// structurally-zero gradients compare in absolute terms.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1.0)
}

/// Check d(objective)/d(inputs) against central differences for every
/// element of every input. `build` maps leaves to the graph output.
pub fn check_gradients<F>(
    inputs: &[Tensor],
    step: f64,
    build: F,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    // analytic pass
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = build(&mut tape, &vars)?;
    let out_shape = tape.value(out).shape().to_vec();
    let weights = functional_weights(&out_shape);
    let grads = tape.backward(out, weights.clone())?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()))
        })
        .collect();

    let objective = |perturbed: &[Tensor]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape
            .value(out)
            .data()
            .iter()
            .zip(weights.data())
            .map(|(y, w)| y * w)
            .sum())
    };

    let mut report = GradCheckReport {
        max_err: 0.0,
        worst_input: 0,
        worst_element: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        elements_checked: 0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for e in 0..input.numel() {
            let orig = input.data()[e];
            work[i].data_mut()[e] = orig + step;
            let plus = objective(&work)?;
            work[i].data_mut()[e] = orig - step;
            let minus = objective(&work)?;
            work[i].data_mut()[e] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[i].data()[e];
            let err = rel_err(a, numeric);
            report.elements_checked += 1;
            if err > report.max_err {
                report.max_err = err;
                report.worst_input = i;
                report.worst_element = e;
                report.analytic_at_worst = a;
                report.numeric_at_worst = numeric;
            }
        }
    }
    Ok(report)
}

/// Deterministic pseudo-random weights for the scalar objective.
fn functional_weights(shape: &[usize]) -> Tensor {
    let mut rng = RngStream::new(0xF0CA_CC1A);
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform(0.25, 1.75)).collect())
}

/// Random test tensor kept away from activation kinks at zero.
pub fn offzero_tensor(shape: &[usize], rng: &mut RngStream) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(
        shape,
        (0..n)
            .map(|_| {
                let v = rng.uniform(0.1, 1.0);
                if rng.bernoulli(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect(),
    )
}
