use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::qcore::C64;

/// Rabi frequency from the spectral peak of a record window.
///
/// `⟨σz⟩(t) = cos(2ωt)` puts the peak at `f = ω/π`, so `ω̂ = π·f_peak`.
pub struct OmegaEstimator {
    window: usize,
    padded: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<C64>,
    /// Moving-average length of the low-pass, in seconds.
    pub lowpass_time: f64,
    /// Highest frequency searched, in Hz.
    pub f_max: f64,
}

impl OmegaEstimator {
    pub fn new(window: usize, pad: usize, lowpass_time: f64, f_max: f64) -> Self {
        let padded = window * pad.max(1);
        let fft = FftPlanner::new().plan_fft_forward(padded);
        OmegaEstimator { window, padded, fft, buf: vec![C64::new(0.0, 0.0); padded], lowpass_time, f_max }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Returns `prev` when the window is not full or no peak rises above
    /// twice the in-band median.
    pub fn estimate(&mut self, window: &[f64], dt: f64, prev: f64) -> f64 {
        let n = window.len();
        if n != self.window || n < 4 {
            return prev;
        }
        let mean = window.iter().sum::<f64>() / n as f64;
        let k = ((self.lowpass_time / dt).round() as usize).clamp(1, n);
        let mut acc = 0.0;
        for z in self.buf.iter_mut() {
            *z = C64::new(0.0, 0.0);
        }
        for i in 0..n {
            acc += window[i] - mean;
            if i >= k {
                acc -= window[i - k] - mean;
            }
            self.buf[i] = C64::new(acc / (i + 1).min(k) as f64, 0.0);
        }
        let lp_mean = self.buf[..n].iter().map(|z| z.re).sum::<f64>() / n as f64;
        for z in &mut self.buf[..n] {
            z.re -= lp_mean;
        }
        self.fft.process(&mut self.buf);

        let df = 1.0 / (self.padded as f64 * dt);
        let k_max = ((self.f_max.min(0.5 / dt) / df).floor() as usize).clamp(2, self.padded / 2);
        let mag: Vec<f64> = self.buf[..=k_max].iter().map(|z| z.norm()).collect();
        let band = &mag[1..=k_max];
        let (peak_off, &peak) = band
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, (i, m)| if *m > *best.1 { (i, m) } else { best });
        let mut sorted = band.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = sorted[sorted.len() / 2];
        if !(peak > 2.0 * median) || !(peak > 0.0) {
            return prev;
        }
        let kp = peak_off + 1;
        let mut delta = 0.0;
        if kp + 1 <= k_max {
            let (a, b, c) = (mag[kp - 1], mag[kp], mag[kp + 1]);
            let den = a - 2.0 * b + c;
            if den != 0.0 {
                delta = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
            }
        }
        let omega = std::f64::consts::PI * (kp as f64 + delta) * df;
        if omega.is_finite() && omega > 0.0 {
            omega
        } else {
            prev
        }
    }
}

/// Measurement strength from the excess variance of block sums.
///
/// Each block sum of `b` increments has variance `b·dt` from the noise plus
/// `4γ·b²·dt²·E[⟨σz⟩²]` from the drift; `E[⟨σz⟩²] ≈ ½` under Rabi driving.
/// The result is clipped to `[lo, hi]`.
pub fn estimate_gamma(block_sums: &[f64], block: usize, dt: f64, lo: f64, hi: f64) -> f64 {
    let n = block_sums.len();
    if n < 2 {
        return lo;
    }
    let mean = block_sums.iter().sum::<f64>() / n as f64;
    let var = block_sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let b = block as f64;
    let excess = (var - b * dt).max(0.0);
    (excess / (4.0 * b * b * dt * dt * 0.5)).clamp(lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub decay: f64,
    pub threshold: f64,
    pub dwell: usize,
    pub refractory: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { decay: 0.98, threshold: 2.5, dwell: 25, refractory: 50 }
    }
}

/// EMA of squared innovations with a dwell requirement and a refractory
/// period after each reset.
#[derive(Clone, Debug, PartialEq)]
pub struct Detector {
    pub cfg: DetectorConfig,
    pub ema: f64,
    pub above: usize,
    pub since_reset: usize,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Self {
        Detector { cfg, ema: 1.0, above: 0, since_reset: 0 }
    }

    /// Feeds one normalized innovation; returns true on a declared switch.
    pub fn update(&mut self, nu: f64) -> bool {
        self.since_reset += 1;
        self.ema = self.cfg.decay * self.ema + (1.0 - self.cfg.decay) * nu * nu;
        if self.ema > self.cfg.threshold {
            self.above += 1;
        } else {
            self.above = 0;
        }
        if self.above >= self.cfg.dwell && self.since_reset > self.cfg.refractory {
            self.ema = 1.0;
            self.above = 0;
            self.since_reset = 0;
            return true;
        }
        false
    }
}
