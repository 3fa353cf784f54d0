//! Training-evaluation protocol machinery: split-plan generation for the
//! six frameworks (SL-DS, SL-RS, SM-DS, SM-RS, SN, SL-DS-FT), an
//! overlapping-window leakage audit, and the metric set (accuracy, Cohen's
//! kappa, moving-average smoothing, confusion matrices, right-tailed
//! Welch's t-test).

mod metrics;
mod report;
mod splits;
mod welch;

pub use metrics::{
    accuracy, cohens_kappa, confusion_matrix, max_sma, sma, KappaScore, MetricTrace,
};
pub use report::{aggregate_report, FoldResult, MeanStd, Summary};
pub use splits::{
    leakage_audit, make_splits, Fold, Framework, LeakageViolation, SplitOptions, SplitPlan,
    TrialMeta,
};
pub use welch::{ln_gamma, reg_inc_beta, student_t_right_tail, welch_t_test_right, WelchTest};

use thiserror::Error;

/// Moving-average window the headline metrics use.
pub const SMA_WINDOW: usize = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {preds} predictions vs {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
    #[error("need at least 2 samples per side, got {n}")]
    TooFewSamples { n: usize },
    #[error("sample variance is zero; Welch's t-test undefined")]
    DegenerateVariance,
    #[error("subject '{subject}' has no second session to leave out")]
    NoLeaveableSession { subject: String },
    #[error("unknown subject '{subject}'")]
    UnknownSubject { subject: String },
    #[error("cannot make {k} folds from {available} units")]
    BadFoldCount { k: usize, available: usize },
    #[error("trial ids must be dense indices: position {index} holds id {found}")]
    BadTrialIds { index: usize, found: usize },
}
