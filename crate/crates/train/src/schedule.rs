use serde::{Deserialize, Serialize};

/// Reduce-on-plateau learning-rate schedule for a minimized metric, with a
/// relative improvement threshold and no cooldown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceOnPlateau {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub threshold: f64,
    lr: f64,
    best: Option<f64>,
    bad_epochs: usize,
    reductions: usize,
}

impl ReduceOnPlateau {
    pub fn new(lr: f64, factor: f64, patience: usize, min_lr: f64, threshold: f64) -> Self {
        Self {
            factor,
            patience,
            min_lr,
            threshold,
            lr,
            best: None,
            bad_epochs: 0,
            reductions: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn reductions(&self) -> usize {
        self.reductions
    }

    /// Records one epoch's metric and returns the learning rate for the next.
    pub fn step(&mut self, metric: f64) -> f64 {
        let improved = match self.best {
            None => true,
            Some(b) => metric < b * (1.0 - self.threshold),
        };
        if improved {
            self.best = Some(metric);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        if self.bad_epochs > self.patience {
            let next = (self.lr * self.factor).max(self.min_lr);
            if self.lr - next > 1e-12 * self.lr {
                self.lr = next;
                self.reductions += 1;
            }
            self.bad_epochs = 0;
        }
        self.lr
    }
}
