//! Per-fold results and cross-fold aggregation.

use serde::{Deserialize, Serialize};

use crate::metrics::MetricTrace;
use crate::welch::{welch_t_test_right, WelchTest};
use crate::EvalError;

/// Final metrics for one cross-validation fold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<MetricTrace>,
    /// Best raw validation accuracy.
    pub acc: f64,
    /// Best moving-average validation accuracy.
    pub ma_acc: f64,
    pub kappa: f64,
    pub confusion: Vec<Vec<usize>>,
}

// MetricTrace serializes as four parallel arrays.
impl Serialize for MetricTrace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("MetricTrace", 4)?;
        st.serialize_field("train_loss", &self.train_loss)?;
        st.serialize_field("train_acc", &self.train_acc)?;
        st.serialize_field("val_loss", &self.val_loss)?;
        st.serialize_field("val_acc", &self.val_acc)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for MetricTrace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            train_loss: Vec<f64>,
            train_acc: Vec<f64>,
            val_loss: Vec<f64>,
            val_acc: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        Ok(MetricTrace {
            train_loss: raw.train_loss,
            train_acc: raw.train_acc,
            val_loss: raw.val_loss,
            val_acc: raw.val_acc,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample (n-1) standard deviation; 0 when only one fold exists.
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MeanStd { mean, std: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    MeanStd { mean, std: var.sqrt() }
}

/// Cross-fold summary in the MA Acc / Acc / kappa column convention.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub folds: usize,
    /// Set when a standard deviation over a single fold was requested.
    pub single_fold: bool,
    pub ma_acc: MeanStd,
    pub acc: MeanStd,
    pub kappa: MeanStd,
    /// Right-tailed Welch's t-test of this model's per-fold ma_acc against
    /// a comparison set, when one was supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub welch_ma_acc_vs_baseline: Option<(f64, f64, f64)>,
}

/// Arithmetic mean +/- sample standard deviation across folds, optionally
/// tested against a second model's per-fold results.
pub fn aggregate_report(
    results: &[FoldResult],
    baseline: Option<&[FoldResult]>,
) -> Result<Summary, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let ma: Vec<f64> = results.iter().map(|r| r.ma_acc).collect();
    let acc: Vec<f64> = results.iter().map(|r| r.acc).collect();
    let kap: Vec<f64> = results.iter().map(|r| r.kappa).collect();
    let welch = match baseline {
        Some(base) if base.len() >= 2 && results.len() >= 2 => {
            let other: Vec<f64> = base.iter().map(|r| r.ma_acc).collect();
            match welch_t_test_right(&ma, &other) {
                Ok(WelchTest { t, dof, p }) => Some((t, dof, p)),
                Err(_) => None,
            }
        }
        _ => None,
    };
    Ok(Summary {
        folds: results.len(),
        single_fold: results.len() == 1,
        ma_acc: mean_std(&ma),
        acc: mean_std(&acc),
        kappa: mean_std(&kap),
        welch_ma_acc_vs_baseline: welch,
    })
}
