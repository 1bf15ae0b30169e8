/// Halves the learning rate after `patience` epochs without a relative
/// improvement of the monitored loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Plateau {
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    pub best: f64,
    pub stale: usize,
}

impl Default for Plateau {
    fn default() -> Self {
        Plateau::new(0.5, 3, 1e-4)
    }
}

impl Plateau {
    pub fn new(factor: f64, patience: usize, threshold: f64) -> Self {
        assert!(factor > 0.0 && factor < 1.0, "plateau factor must lie in (0, 1)");
        Plateau { factor, patience, threshold, best: f64::INFINITY, stale: 0 }
    }

    /// Feeds one epoch loss and returns the (possibly reduced) rate.
    pub fn step(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best * (1.0 - self.threshold) {
            self.best = loss;
            self.stale = 0;
            return lr;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            self.stale = 0;
            return lr * self.factor;
        }
        lr
    }
}
