//! Classification metrics and learning-curve smoothing.

use crate::EvalError;

fn check_pair(preds: &[usize], labels: &[usize]) -> Result<(), EvalError> {
    if preds.is_empty() || labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    Ok(())
}

/// Fraction of correctly predicted samples.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64, EvalError> {
    check_pair(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Rows are true classes, columns predictions; the total equals N.
pub fn confusion_matrix(
    preds: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Vec<usize>>, EvalError> {
    check_pair(preds, labels)?;
    let mut m = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= num_classes || l >= num_classes {
            return Err(EvalError::ClassOutOfRange { class: p.max(l), num_classes });
        }
        m[l][p] += 1;
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaScore {
    pub value: f64,
    /// Both marginals were concentrated on a single identical class, so
    /// chance agreement is total; the score is defined as 0 in that case.
    pub degenerate_marginals: bool,
}

/// Chance-corrected agreement: (P_a - P_e) / (1 - P_e), with P_e from the
/// product of row and column marginals.
pub fn cohens_kappa(
    preds: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<KappaScore, EvalError> {
    let m = confusion_matrix(preds, labels, num_classes)?;
    let n = preds.len() as f64;
    let p_a: f64 = (0..num_classes).map(|c| m[c][c] as f64).sum::<f64>() / n;
    let mut p_e = 0.0;
    for (c, m_row) in m.iter().enumerate() {
        let row: usize = m_row.iter().sum();
        let col: usize = m.iter().map(|r| r[c]).sum();
        p_e += row as f64 * col as f64 / (n * n);
    }
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(KappaScore { value: 0.0, degenerate_marginals: true });
    }
    Ok(KappaScore { value: (p_a - p_e) / (1.0 - p_e), degenerate_marginals: false })
}

/// Simple moving average; early epochs average over however many values
/// exist rather than being undefined.
pub fn sma(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    let mut out = Vec::with_capacity(series.len());
    let mut running = 0.0;
    for e in 0..series.len() {
        running += series[e];
        if e >= window {
            running -= series[e - window];
        }
        let count = (e + 1).min(window);
        out.push(running / count as f64);
    }
    out
}

/// Epoch index and value of the smoothed series' maximum.
pub fn max_sma(series: &[f64], window: usize) -> Option<(usize, f64)> {
    let smoothed = sma(series, window);
    smoothed
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, &v)| (i, v))
}

/// Per-epoch learning-curve series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricTrace {
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
}

impl MetricTrace {
    pub fn push(&mut self, train_loss: f64, train_acc: f64, val_loss: f64, val_acc: f64) {
        self.train_loss.push(train_loss);
        self.train_acc.push(train_acc);
        self.val_loss.push(val_loss);
        self.val_acc.push(val_acc);
    }

    pub fn len(&self) -> usize {
        self.val_acc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.val_acc.is_empty()
    }

    /// Epoch with the best raw validation accuracy (first on ties).
    pub fn best_val_epoch(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.val_acc.iter().enumerate() {
            if best.map(|(_, bv)| v > bv).unwrap_or(true) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_extremes_and_counts() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0, 0], &[1, 2, 3]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 2, 3, 0], &[1, 2, 3, 1]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn confusion_total_and_trace_identity() {
        let preds = [0, 1, 1, 2, 3, 3, 0];
        let labels = [0, 1, 2, 2, 3, 0, 0];
        let m = confusion_matrix(&preds, &labels, 4).unwrap();
        let total: usize = m.iter().flatten().sum();
        assert_eq!(total, preds.len());
        let diag: usize = (0..4).map(|c| m[c][c]).sum();
        let acc = accuracy(&preds, &labels).unwrap();
        assert!((acc - diag as f64 / preds.len() as f64).abs() < 1e-15);
        assert!(confusion_matrix(&[5], &[0], 4).is_err());
    }

    #[test]
    fn perfect_predictions_give_diagonal_matrix() {
        let labels = [0, 1, 2, 3, 2, 1];
        let m = confusion_matrix(&labels, &labels, 4).unwrap();
        for (r, row) in m.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if r != c {
                    assert_eq!(v, 0);
                }
            }
        }
    }

    #[test]
    fn kappa_perfect_and_single_class() {
        let labels = [0, 1, 2, 3, 0, 1, 2, 3];
        assert_eq!(cohens_kappa(&labels, &labels, 4).unwrap().value, 1.0);
        // always predicting one class on a balanced set: P_a = P_e = 0.25
        let preds = [0usize; 8];
        let k = cohens_kappa(&preds, &labels, 4).unwrap();
        assert!(k.value.abs() < 1e-12);
        assert!(!k.degenerate_marginals);
    }

    #[test]
    fn kappa_degenerate_when_both_sides_single_class() {
        let k = cohens_kappa(&[2, 2, 2], &[2, 2, 2], 4).unwrap();
        assert_eq!(k.value, 0.0);
        assert!(k.degenerate_marginals);
    }

    #[test]
    fn sma_constant_and_alternating() {
        let c = vec![0.7; 50];
        assert!(sma(&c, 20).iter().all(|&v| (v - 0.7).abs() < 1e-15));
        let alt: Vec<f64> = (0..60).map(|i| (i % 2) as f64).collect();
        let s = sma(&alt, 20);
        for &v in &s[20..] {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sma_max_never_exceeds_series_max() {
        let series: Vec<f64> = (0..100).map(|i| ((i * 37) % 89) as f64 / 89.0).collect();
        let series_max = series.iter().cloned().fold(f64::MIN, f64::max);
        let (_, sm) = max_sma(&series, 20).unwrap();
        assert!(sm <= series_max + 1e-15);
    }
}
