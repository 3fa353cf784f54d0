//! Model optimization: cross-entropy losses fused through the softmax,
//! Adam with constraint projection, reduce-on-plateau learning-rate decay,
//! accuracy-based early stopping, best-checkpoint tracking, and
//! fine-tuning from a saved base model.

mod loss;
mod optimizer;
mod scheduler;
mod trainer;

pub use loss::{bce_loss, cce_loss, LossKind};
pub use optimizer::OptimizerState;
pub use scheduler::{early_stop_check, SchedulerState};
pub use trainer::{
    evaluate_dataset, fine_tune, to_batch, train, Hyper, TrainReport, FINE_TUNE_LR,
};

use agtc_eval::LeakageViolation;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("bad training data: {0}")]
    BadData(String),
    #[error("train/validation leakage detected: {} overlapping pair(s), first at fold {} (train trial {}, val trial {}, {} samples)",
        violations.len(), violations[0].fold, violations[0].train_trial, violations[0].val_trial, violations[0].overlap_samples)]
    Leakage { violations: Vec<LeakageViolation> },
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NumericFailure { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] agtc_model::ModelError),
    #[error(transparent)]
    Eval(#[from] agtc_eval::EvalError),
}
