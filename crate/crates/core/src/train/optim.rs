use crate::error::{Error, Result};

/// AdamW with bias-corrected moments and decoupled weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamW {
    pub fn new(n: usize, lr: f64, weight_decay: f64) -> Self {
        AdamW { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// `p ← p − lr·m̂/(√v̂ + eps) − lr·wd·p`
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer over {} values got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence { step: self.t as usize, what: format!("non-finite gradient at {i}") });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let step = (*m / c1) / ((*v / c2).sqrt() + self.eps);
            *p -= self.lr * step + self.lr * self.weight_decay * *p;
        }
        Ok(())
    }

    /// `[t, lr, m…, v…]`
    pub fn to_blob(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(2 + 2 * self.m.len());
        b.push(self.t as f64);
        b.push(self.lr);
        b.extend_from_slice(&self.m);
        b.extend_from_slice(&self.v);
        b
    }

    pub fn from_blob(blob: &[f64], weight_decay: f64) -> Result<Self> {
        if blob.len() < 2 || (blob.len() - 2) % 2 != 0 {
            return Err(Error::Shape(format!("optimizer blob of {} values", blob.len())));
        }
        let n = (blob.len() - 2) / 2;
        let mut o = AdamW::new(n, blob[1], weight_decay);
        o.t = blob[0] as u64;
        o.m.copy_from_slice(&blob[2..2 + n]);
        o.v.copy_from_slice(&blob[2 + n..]);
        Ok(o)
    }
}
