//! Named trainable parameters and post-update projections.

use crate::tensor::{strides_of, Tensor};

/// Projection applied to a parameter after every optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constraint {
    /// Rescale every slice along `axis` to Euclidean norm <= `limit`.
    MaxNorm { limit: f64, axis: usize },
    /// Clamp elementwise into [lo, hi].
    MinMax { lo: f64, hi: f64 },
}

impl Constraint {
    pub fn project(&self, t: &mut Tensor) {
        match *self {
            Constraint::MinMax { lo, hi } => {
                for v in t.data_mut() {
                    *v = v.clamp(lo, hi);
                }
            }
            Constraint::MaxNorm { limit, axis } => {
                let shape = t.shape().to_vec();
                let strides = strides_of(&shape);
                let len = shape[axis];
                let stride = strides[axis];
                let outer: usize = shape[..axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let data = t.data_mut();
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * len * inner + i;
                        let mut sq = 0.0;
                        for l in 0..len {
                            let v = data[base + l * stride];
                            sq += v * v;
                        }
                        let norm = sq.sqrt();
                        if norm > limit {
                            let s = limit / norm;
                            for l in 0..len {
                                data[base + l * stride] *= s;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Whether `t` already satisfies the constraint (within `tol`).
    pub fn holds(&self, t: &Tensor, tol: f64) -> bool {
        let mut probe = t.clone();
        self.project(&mut probe);
        probe
            .data()
            .iter()
            .zip(t.data())
            .all(|(a, b)| (a - b).abs() <= tol * b.abs().max(1.0))
    }
}

/// One named parameter tensor with its gradient slot.
#[derive(Clone, Debug)]
pub struct LayerParam {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Tensor>,
    pub trainable: bool,
    pub constraint: Option<Constraint>,
}

impl LayerParam {
    pub fn new(name: impl Into<String>, value: Tensor) -> LayerParam {
        LayerParam { name: name.into(), value, grad: None, trainable: true, constraint: None }
    }

    pub fn with_constraint(mut self, c: Constraint) -> LayerParam {
        self.constraint = Some(c);
        self
    }
}

/// Project every constrained parameter in place.
pub fn apply_constraints(params: &mut [LayerParam]) {
    for p in params.iter_mut() {
        if let Some(c) = p.constraint {
            c.project(&mut p.value);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_norm_rescales_preserving_direction() {
        let mut t = Tensor::new(&[2, 1], vec![1.2, 1.6]); // norm 2 along axis 0
        Constraint::MaxNorm { limit: 1.0, axis: 0 }.project(&mut t);
        let norm = (t.data()[0].powi(2) + t.data()[1].powi(2)).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((t.data()[0] / t.data()[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn feasible_slice_unchanged() {
        let mut t = Tensor::new(&[2, 1], vec![0.06, 0.08]); // norm 0.1
        let before = t.clone();
        Constraint::MaxNorm { limit: 0.25, axis: 0 }.project(&mut t);
        assert_eq!(t, before);
    }

    #[test]
    fn min_max_clamps() {
        let mut t = Tensor::new(&[3], vec![1.3, -0.2, 0.5]);
        Constraint::MinMax { lo: 0.0, hi: 1.0 }.project(&mut t);
        assert_eq!(t.data(), &[1.0, 0.0, 0.5]);
    }

    #[test]
    fn per_column_norms_along_axis0() {
        // (in=2, out=2) kernel: each output column constrained separately
        let mut t = Tensor::new(&[2, 2], vec![3.0, 0.1, 4.0, 0.2]);
        Constraint::MaxNorm { limit: 1.0, axis: 0 }.project(&mut t);
        let col0 = (t.at(&[0, 0]).powi(2) + t.at(&[1, 0]).powi(2)).sqrt();
        assert!((col0 - 1.0).abs() < 1e-12);
        // second column had norm ~0.224 < 1, untouched
        assert_eq!(t.at(&[0, 1]), 0.1);
        assert_eq!(t.at(&[1, 1]), 0.2);
    }
}
