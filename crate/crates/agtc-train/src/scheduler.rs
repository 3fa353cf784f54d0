//! Validation-loss plateau LR decay and accuracy-based early stopping.

/// Reduce-on-plateau state. Improvement means the monitored loss dropped
/// below the best seen by more than `threshold`; once the stagnation
/// counter exceeds `patience`, the rate decays by `factor` down to `min_lr`.
#[derive(Clone, Debug)]
pub struct SchedulerState {
    pub factor: f64,
    pub patience: usize,
    pub cooldown: usize,
    pub min_lr: f64,
    pub threshold: f64,
    best: f64,
    wait: usize,
    cooling: usize,
}

impl Default for SchedulerState {
    fn default() -> Self {
        SchedulerState {
            factor: 0.9,
            patience: 10,
            cooldown: 0,
            min_lr: 1e-4,
            threshold: 1e-4,
            best: f64::INFINITY,
            wait: 0,
            cooling: 0,
        }
    }
}

impl SchedulerState {
    /// Call once per epoch with the current LR and validation loss; returns
    /// the learning rate to use next.
    pub fn scheduler_step(&mut self, current_lr: f64, val_loss: f64) -> f64 {
        if val_loss < self.best - self.threshold {
            self.best = val_loss;
            self.wait = 0;
            return current_lr;
        }
        if self.cooling > 0 {
            self.cooling -= 1;
            return current_lr;
        }
        self.wait += 1;
        if self.wait > self.patience {
            self.wait = 0;
            self.cooling = self.cooldown;
            return (current_lr * self.factor).max(self.min_lr);
        }
        current_lr
    }
}

/// True once the epochs since the best validation accuracy exceed the
/// patience. `val_acc` is the per-epoch series so far.
pub fn early_stop_check(val_acc: &[f64], patience: usize) -> bool {
    if val_acc.is_empty() {
        return false;
    }
    let mut best_epoch = 0;
    let mut best = f64::MIN;
    for (i, &v) in val_acc.iter().enumerate() {
        if v > best {
            best = v;
            best_epoch = i;
        }
    }
    (val_acc.len() - 1) - best_epoch > patience
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_stagnant_epochs_decay_once() {
        let mut s = SchedulerState::default();
        let mut lr = 1e-3;
        lr = s.scheduler_step(lr, 0.5); // establishes the best
        for _ in 0..10 {
            lr = s.scheduler_step(lr, 0.6);
            assert_eq!(lr, 1e-3, "no decay before patience is exceeded");
        }
        lr = s.scheduler_step(lr, 0.6); // 11th stagnant epoch
        assert!((lr - 9e-4).abs() < 1e-15, "lr {lr}");
    }

    #[test]
    fn floor_at_min_lr() {
        let mut s = SchedulerState::default();
        let mut lr = 1e-3;
        s.scheduler_step(lr, 0.5);
        for _ in 0..2000 {
            lr = s.scheduler_step(lr, 0.6);
            assert!(lr >= 1e-4 - 1e-18);
        }
        assert_eq!(lr, 1e-4);
        // once at the floor it never decreases further
        for _ in 0..20 {
            lr = s.scheduler_step(lr, 0.9);
        }
        assert_eq!(lr, 1e-4);
    }

    #[test]
    fn improvement_resets_the_counter() {
        let mut s = SchedulerState::default();
        let mut lr = 1e-3;
        lr = s.scheduler_step(lr, 0.5);
        for _ in 0..5 {
            lr = s.scheduler_step(lr, 0.7);
        }
        lr = s.scheduler_step(lr, 0.4); // improvement at epoch 5
        for _ in 0..10 {
            lr = s.scheduler_step(lr, 0.7);
            assert_eq!(lr, 1e-3, "counter should have reset");
        }
        lr = s.scheduler_step(lr, 0.7);
        assert!((lr - 9e-4).abs() < 1e-15);
    }

    #[test]
    fn sub_threshold_improvement_does_not_reset() {
        let mut s = SchedulerState::default();
        let mut lr = 1e-3;
        lr = s.scheduler_step(lr, 0.5);
        for _ in 0..11 {
            // shrinking by less than the 1e-4 threshold is stagnation
            lr = s.scheduler_step(lr, 0.5 - 0.5e-4);
        }
        assert!((lr - 9e-4).abs() < 1e-15);
    }

    #[test]
    fn early_stop_rules() {
        // monotone improvement never stops
        let rising: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        assert!(!early_stop_check(&rising, 300));

        // best at epoch 10 (0-based), 301 epochs since -> stop
        let mut trace = vec![0.1; 312];
        trace[10] = 0.9;
        assert!(early_stop_check(&trace, 300));
        assert!(!early_stop_check(&trace[..311], 300));

        // EEGMMIDB-style patience 100
        let mut t2 = vec![0.2; 112];
        t2[10] = 0.8;
        assert!(early_stop_check(&t2, 100));
    }
}
