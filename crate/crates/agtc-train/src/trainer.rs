//! The training loop: seeded shuffling, minibatch updates, per-epoch
//! validation, plateau LR decay, best-checkpoint tracking, early stopping,
//! and a leakage gate that refuses contaminated train/validation pairs.

use std::time::Instant;

use agtc_eval::{
    accuracy, leakage_audit, max_sma, Fold, Framework, MetricTrace, SplitPlan, TrialMeta,
    SMA_WINDOW,
};
use agtc_model::{load_weights, read_weights_config, ModelState};
use agtc_signal::EpochedTrial;
use agtc_tensor::{Mode, RngStream, Tensor};

use crate::loss::LossKind;
use crate::optimizer::OptimizerState;
use crate::scheduler::{early_stop_check, SchedulerState};
use crate::TrainError;

pub const FINE_TUNE_LR: f64 = 5e-4;

#[derive(Clone, Debug)]
pub struct Hyper {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub early_stop_patience: usize,
    /// Plateau decay on validation loss; disabling it mirrors the
    /// no-decay ablation and is not recommended.
    pub lr_decay: bool,
    pub scheduler: SchedulerState,
    pub tag: String,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            max_epochs: 1000,
            batch_size: 32,
            learning_rate: 1e-3,
            loss: LossKind::Cce,
            early_stop_patience: 300,
            lr_decay: true,
            scheduler: SchedulerState::default(),
            tag: "custom".into(),
        }
    }
}

impl Hyper {
    pub fn fine_tune() -> Hyper {
        Hyper { learning_rate: FINE_TUNE_LR, tag: "SL-DS-FT".into(), ..Hyper::default() }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub framework_tag: String,
    pub trace: MetricTrace,
    /// Learning rate in effect during each epoch.
    pub lr_history: Vec<f64>,
    /// Epoch (0-based) of the best raw validation accuracy; None when the
    /// initial (pre-training) evaluation was never beaten.
    pub best_epoch: Option<usize>,
    pub best_val_acc: f64,
    pub best_sma_epoch: Option<usize>,
    pub best_sma_val_acc: f64,
    pub initial_lr: f64,
    pub final_lr: f64,
    pub initial_val_loss: f64,
    pub initial_val_acc: f64,
    pub stopped_early: bool,
    pub wall_secs: f64,
    /// Weights at the best validation accuracy.
    pub best_model: ModelState,
}

/// Stack trials into a (B, C, T, 1) batch plus labels.
pub fn to_batch(trials: &[&EpochedTrial]) -> Result<(Tensor, Vec<usize>), TrainError> {
    let first = trials.first().ok_or_else(|| TrainError::BadData("empty batch".into()))?;
    let (c, t) = (first.num_channels(), first.num_samples());
    let mut data = Vec::with_capacity(trials.len() * c * t);
    let mut labels = Vec::with_capacity(trials.len());
    for trial in trials {
        if trial.num_channels() != c || trial.num_samples() != t {
            return Err(TrainError::BadData(format!(
                "trial shapes differ: ({c}, {t}) vs ({}, {})",
                trial.num_channels(),
                trial.num_samples()
            )));
        }
        for row in &trial.data {
            data.extend_from_slice(row);
        }
        labels.push(trial.label);
    }
    Ok((Tensor::new(&[trials.len(), c, t, 1], data), labels))
}

/// Inference-mode loss/accuracy/predictions over a whole dataset.
pub fn evaluate_dataset(
    model: &ModelState,
    set: &[EpochedTrial],
    batch_size: usize,
    loss: LossKind,
) -> Result<(f64, f64, Vec<usize>), TrainError> {
    if set.is_empty() {
        return Err(TrainError::BadData("empty evaluation set".into()));
    }
    let mut preds = Vec::with_capacity(set.len());
    let mut weighted_loss = 0.0;
    for chunk in set.chunks(batch_size.max(1)) {
        let refs: Vec<&EpochedTrial> = chunk.iter().collect();
        let (batch, labels) = to_batch(&refs)?;
        let probs = model.infer(&batch)?;
        let (l, _) = loss.compute(&probs, &labels)?;
        weighted_loss += l * labels.len() as f64;
        let k = probs.shape()[1];
        for row in 0..labels.len() {
            let mut best = 0;
            for c in 1..k {
                if probs.at(&[row, c]) > probs.at(&[row, best]) {
                    best = c;
                }
            }
            preds.push(best);
        }
    }
    let labels: Vec<usize> = set.iter().map(|t| t.label).collect();
    let acc = accuracy(&preds, &labels)?;
    Ok((weighted_loss / set.len() as f64, acc, preds))
}

/// Refuse train/validation pairs that share a trial or overlap in time
/// within the same (subject, session, run).
fn leakage_gate(train_set: &[EpochedTrial], val_set: &[EpochedTrial]) -> Result<(), TrainError> {
    let mut provenance = Vec::with_capacity(train_set.len() + val_set.len());
    let mut fold = Fold::default();
    for (i, trial) in train_set.iter().chain(val_set).enumerate() {
        provenance.push(TrialMeta {
            trial_id: i,
            subject: trial.subject_id.clone(),
            session: trial.session_id.clone(),
            run: trial.run_id.clone(),
            label: trial.label,
            window_span: trial.window_span,
        });
        if i < train_set.len() {
            fold.train.push(i);
        } else {
            fold.val.push(i);
        }
    }
    let plan = SplitPlan { framework: Framework::SmRs, folds: vec![fold], provenance };
    let violations = leakage_audit(&plan);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(TrainError::Leakage { violations })
    }
}

/// Optimize `model` on the training set, checkpointing on validation
/// accuracy. The validation set is evaluated once per epoch in inference
/// mode after the full training pass.
pub fn train(
    model: &mut ModelState,
    train_set: &[EpochedTrial],
    val_set: &[EpochedTrial],
    hyper: &Hyper,
    rng: &RngStream,
) -> Result<TrainReport, TrainError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::BadData("train and validation sets must be non-empty".into()));
    }
    leakage_gate(train_set, val_set)?;
    let started = Instant::now();

    let mut optimizer = OptimizerState::adam(hyper.learning_rate);
    let mut scheduler = hyper.scheduler.clone();
    let mut trace = MetricTrace::default();
    let mut lr_history = Vec::new();

    let (initial_val_loss, initial_val_acc, _) =
        evaluate_dataset(model, val_set, hyper.batch_size, hyper.loss)?;
    let mut best_val_acc = initial_val_acc;
    let mut best_epoch: Option<usize> = None;
    let mut best_model = model.clone();
    let mut stopped_early = false;

    for epoch in 0..hyper.max_epochs {
        let mut epoch_rng = rng.substream(epoch as u64);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        epoch_rng.shuffle(&mut order);

        let mut seen = 0usize;
        let mut loss_sum = 0.0;
        let mut hit_sum = 0usize;
        for chunk in order.chunks(hyper.batch_size.max(1)) {
            let refs: Vec<&EpochedTrial> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (batch, labels) = to_batch(&refs)?;
            let pass = model.forward(&batch, Mode::Train, &mut epoch_rng)?;
            let (loss, grad) = hyper.loss.compute(&pass.probs, &labels)?;
            if !loss.is_finite() {
                return Err(TrainError::NumericFailure {
                    epoch,
                    batch: seen / hyper.batch_size.max(1),
                    loss,
                });
            }
            model.zero_grads();
            model.backward(&pass, grad)?;
            optimizer.adam_step(model.params_mut());

            let k = pass.probs.shape()[1];
            for (row, &label) in labels.iter().enumerate() {
                let mut best = 0;
                for c in 1..k {
                    if pass.probs.at(&[row, c]) > pass.probs.at(&[row, best]) {
                        best = c;
                    }
                }
                hit_sum += usize::from(best == label);
            }
            loss_sum += loss * labels.len() as f64;
            seen += labels.len();
        }
        let train_loss = loss_sum / seen as f64;
        let train_acc = hit_sum as f64 / seen as f64;

        let (val_loss, val_acc, _) =
            evaluate_dataset(model, val_set, hyper.batch_size, hyper.loss)?;
        trace.push(train_loss, train_acc, val_loss, val_acc);
        lr_history.push(optimizer.learning_rate);

        if hyper.lr_decay {
            optimizer.learning_rate = scheduler.scheduler_step(optimizer.learning_rate, val_loss);
        }
        if val_acc > best_val_acc {
            best_val_acc = val_acc;
            best_epoch = Some(epoch);
            best_model = model.clone();
        }
        if early_stop_check(&trace.val_acc, hyper.early_stop_patience) {
            stopped_early = true;
            break;
        }
    }

    let best_sma = max_sma(&trace.val_acc, SMA_WINDOW);
    Ok(TrainReport {
        framework_tag: hyper.tag.clone(),
        lr_history,
        best_epoch,
        best_val_acc,
        best_sma_epoch: best_sma.map(|(e, _)| e),
        best_sma_val_acc: best_sma.map(|(_, v)| v).unwrap_or(initial_val_acc),
        initial_lr: hyper.learning_rate,
        final_lr: optimizer.learning_rate,
        initial_val_loss,
        initial_val_acc,
        stopped_early,
        wall_secs: started.elapsed().as_secs_f64(),
        best_model,
        trace,
    })
}

/// Resume from a saved checkpoint and train at the fine-tuning rate; the
/// report is tagged SL-DS-FT unless the hyperparameters say otherwise.
pub fn fine_tune(
    base_checkpoint: impl AsRef<std::path::Path>,
    adjacency: agtc_graph::AdjacencyGraph,
    subject_train: &[EpochedTrial],
    subject_val: &[EpochedTrial],
    hyper: &Hyper,
    rng: &RngStream,
) -> Result<TrainReport, TrainError> {
    let config = read_weights_config(&base_checkpoint)?;
    let mut model = load_weights(&base_checkpoint, config, adjacency)?;
    train(&mut model, subject_train, subject_val, hyper, rng)
}
