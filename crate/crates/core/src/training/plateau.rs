use serde::{Deserialize, Serialize};

/// Reduce-on-plateau state for a metric where larger is better.
///
/// An epoch whose metric does not beat the best so far counts as
/// non-improving; once more than `patience` such epochs accumulate the scale
/// is multiplied by `decay_factor` and the counter restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauState {
    pub best_metric: f64,
    pub epochs_since_improve: usize,
    pub patience: usize,
    pub decay_factor: f64,
    pub current_lr_scale: f64,
    /// 1-based epochs after which a decay fired.
    pub decay_epochs: Vec<usize>,
    pub epoch: usize,
}

impl PlateauState {
    pub fn new(patience: usize, decay_factor: f64) -> Self {
        Self {
            best_metric: f64::NEG_INFINITY,
            epochs_since_improve: 0,
            patience,
            decay_factor,
            current_lr_scale: 1.0,
            decay_epochs: Vec::new(),
            epoch: 0,
        }
    }

    /// Records the metric of the next epoch; returns whether the scale decayed.
    pub fn step(&mut self, metric: f64) -> bool {
        self.epoch += 1;
        if metric > self.best_metric {
            self.best_metric = metric;
            self.epochs_since_improve = 0;
            return false;
        }
        self.epochs_since_improve += 1;
        if self.epochs_since_improve > self.patience {
            self.current_lr_scale *= self.decay_factor;
            self.decay_epochs.push(self.epoch);
            self.epochs_since_improve = 0;
            return true;
        }
        false
    }
}

/// Functional form of [`PlateauState::step`].
pub fn plateau_step(state: &PlateauState, metric: f64) -> PlateauState {
    let mut next = state.clone();
    next.step(metric);
    next
}
