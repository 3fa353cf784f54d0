//! Adam with bias correction and post-step constraint projection.

use std::collections::BTreeMap;

use agtc_tensor::{apply_constraints, LayerParam, Tensor};

#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl OptimizerState {
    pub fn adam(learning_rate: f64) -> OptimizerState {
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over every trainable parameter carrying a gradient, then
    /// constraint projection. The step counter advances exactly once.
    pub fn adam_step(&mut self, params: &mut [LayerParam]) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for p in params.iter_mut() {
            if !p.trainable {
                continue;
            }
            let Some(grad) = p.grad.as_ref() else { continue };
            let (m, v) = self
                .moments
                .entry(p.name.clone())
                .or_insert_with(|| (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())));
            for i in 0..grad.numel() {
                let g = grad.data()[i];
                let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * g;
                let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * g * g;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let update = self.learning_rate * (mi / bc1) / ((vi / bc2).sqrt() + self.epsilon);
                p.value.data_mut()[i] -= update;
            }
        }
        apply_constraints(params);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use agtc_tensor::Constraint;

    fn scalar_param(name: &str, value: f64) -> LayerParam {
        LayerParam::new(name, Tensor::scalar(value))
    }

    #[test]
    fn first_step_moves_by_roughly_lr_for_large_gradients() {
        let mut opt = OptimizerState::adam(1e-3);
        let mut params = vec![scalar_param("w", 0.5)];
        params[0].grad = Some(Tensor::scalar(10.0));
        opt.adam_step(&mut params);
        // first bias-corrected step: lr * g / (|g| + eps') ~ lr * sign(g)
        let delta = params[0].value.data()[0] - 0.5;
        assert!((delta + 1e-3).abs() < 1e-6, "delta {delta}");
    }

    #[test]
    fn zero_gradient_leaves_parameter_but_advances_step() {
        let mut opt = OptimizerState::adam(1e-3);
        let mut params = vec![scalar_param("w", 0.7)];
        params[0].grad = Some(Tensor::scalar(0.0));
        opt.adam_step(&mut params);
        assert_eq!(params[0].value.data()[0], 0.7);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // f(w) = w^2, grad = 2w
        for &w0 in &[1.0, -1.0, 0.3] {
            let mut opt = OptimizerState::adam(1e-3);
            let mut params = vec![scalar_param("w", w0)];
            for _ in 0..5000 {
                let w = params[0].value.data()[0];
                params[0].grad = Some(Tensor::scalar(2.0 * w));
                opt.adam_step(&mut params);
            }
            let w = params[0].value.data()[0];
            assert!(w.abs() < 1e-3, "from {w0}: ended at {w}");
        }
    }

    #[test]
    fn constraints_hold_after_every_step() {
        let mut opt = OptimizerState::adam(0.05);
        let mut params = vec![LayerParam::new("w", Tensor::new(&[2, 1], vec![0.2, 0.2]))
            .with_constraint(Constraint::MaxNorm { limit: 0.25, axis: 0 })];
        for step in 0..50 {
            params[0].grad = Some(Tensor::new(&[2, 1], vec![-1.0, -0.5]));
            opt.adam_step(&mut params);
            let norm =
                (params[0].value.data()[0].powi(2) + params[0].value.data()[1].powi(2)).sqrt();
            assert!(norm <= 0.25 + 1e-12, "step {step}: norm {norm}");
        }
    }
}
