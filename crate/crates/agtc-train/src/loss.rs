//! Classification losses with gradients fused through the softmax.

use agtc_tensor::Tensor;

use crate::TrainError;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum LossKind {
    /// Categorical cross-entropy (multiclass).
    #[default]
    Cce,
    /// Binary cross-entropy over a 2-unit softmax head.
    Bce,
}

impl LossKind {
    pub fn compute(
        &self,
        probs: &Tensor,
        labels: &[usize],
    ) -> Result<(f64, Tensor), TrainError> {
        match self {
            LossKind::Cce => cce_loss(probs, labels),
            LossKind::Bce => bce_loss(probs, labels),
        }
    }
}

fn check_inputs(probs: &Tensor, labels: &[usize]) -> Result<(usize, usize), TrainError> {
    if probs.rank() != 2 {
        return Err(TrainError::BadData(format!(
            "probabilities must be (B, K), got {:?}",
            probs.shape()
        )));
    }
    let (b, k) = (probs.shape()[0], probs.shape()[1]);
    if labels.len() != b {
        return Err(TrainError::BadData(format!("{b} rows but {} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(TrainError::BadData(format!("label {bad} out of range for {k} classes")));
    }
    for row in 0..b {
        let s: f64 = (0..k).map(|c| probs.at(&[row, c])).sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(TrainError::BadData(format!("row {row} sums to {s}, not 1")));
        }
    }
    Ok((b, k))
}

/// Gradient of a one-hot indicator through the softmax: (p - y) / B.
fn fused_logit_grad(probs: &Tensor, labels: &[usize]) -> Tensor {
    let (b, k) = (probs.shape()[0], probs.shape()[1]);
    let mut g = probs.clone();
    let inv_b = 1.0 / b as f64;
    for (row, &label) in labels.iter().enumerate() {
        for c in 0..k {
            let p = g.at(&[row, c]);
            g.set(&[row, c], (p - f64::from(u8::from(c == label))) * inv_b);
        }
    }
    g
}

/// Mean over the batch of -log p[label], plus d(loss)/d(logits).
pub fn cce_loss(probs: &Tensor, labels: &[usize]) -> Result<(f64, Tensor), TrainError> {
    let (b, _) = check_inputs(probs, labels)?;
    let mut loss = 0.0;
    for (row, &label) in labels.iter().enumerate() {
        loss -= probs.at(&[row, label]).max(f64::MIN_POSITIVE).ln();
    }
    Ok((loss / b as f64, fused_logit_grad(probs, labels)))
}

/// Mean over batch and both units of -[y ln p + (1-y) ln(1-p)], for the
/// two-class softmax head. For that head the fused logit gradient equals
/// the categorical one, (p - y)/B.
pub fn bce_loss(probs: &Tensor, labels: &[usize]) -> Result<(f64, Tensor), TrainError> {
    let (b, k) = check_inputs(probs, labels)?;
    if k != 2 {
        return Err(TrainError::BadData(format!(
            "binary cross-entropy needs a 2-unit head, got {k}"
        )));
    }
    const EPS: f64 = 1e-12;
    let mut loss = 0.0;
    for (row, &label) in labels.iter().enumerate() {
        for c in 0..k {
            let y = f64::from(u8::from(c == label));
            let p = probs.at(&[row, c]).clamp(EPS, 1.0 - EPS);
            loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        }
    }
    Ok((loss / (b * k) as f64, fused_logit_grad(probs, labels)))
}
