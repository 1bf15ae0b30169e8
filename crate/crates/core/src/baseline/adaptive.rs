use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::estimators::{estimate_gamma, Detector, DetectorConfig, OmegaEstimator};
use super::filter::filter_step;
use crate::error::Result;
use crate::qcore::{CMat2, DensityMatrix};
use crate::sim::{record_drift, SimParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn pauli(&self) -> CMat2 {
        match self {
            Axis::X => CMat2::pauli_x(),
            Axis::Y => CMat2::pauli_y(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    pub fft_window: usize,
    pub fft_pad: usize,
    pub lowpass_time: f64,
    pub f_max: f64,
    pub gamma_block: usize,
    /// Steps of history behind the γ estimate; 0 uses everything since the
    /// last reset.
    pub gamma_history: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Estimates used until the estimators first produce a value.
    pub omega_init: f64,
    pub gamma_init: f64,
    pub detector: DetectorConfig,
    /// Toggle the drive axis from σx to σy on a detected switch.
    pub toggle_axis: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            fft_window: 100,
            fft_pad: 8,
            lowpass_time: 0.05,
            f_max: 5.0,
            gamma_block: 20,
            gamma_history: 100,
            gamma_min: 0.1,
            gamma_max: 2.0,
            omega_init: 2.0,
            gamma_init: 0.5,
            detector: DetectorConfig::default(),
            toggle_axis: true,
        }
    }
}

impl AdaptiveConfig {
    /// One-line statement of what the filter is told about the protocol.
    pub fn policy(&self) -> String {
        format!(
            "knows: drive σx then σy, constant γ, ρ₀ = |0⟩⟨0|; estimates ω by FFT (window {}, pad ×{}), γ by block-sum \
             excess variance over {} (block {}); on detection {}",
            self.fft_window,
            self.fft_pad,
            if self.gamma_history == 0 { "everything since the last reset".to_string() } else { format!("the last {} steps", self.gamma_history) },
            self.gamma_block,
            if self.toggle_axis { "toggles the axis x → y" } else { "keeps the axis" }
        )
    }
}

/// Per-step estimator output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterEvent {
    pub step: usize,
    pub omega: f64,
    pub gamma: f64,
    pub ema: f64,
    pub detected: bool,
}

#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub states: Vec<DensityMatrix>,
    pub events: Vec<FilterEvent>,
    pub detections: Vec<usize>,
}

/// True parameters that replace the estimators.
pub type KnownParams = SimParams;

/// Filters a raw record while estimating `(ω, γ)` online and watching the
/// innovation for the switch. With `known` set, the estimators are bypassed
/// and the true schedule drives the filter.
pub fn adaptive_filter(
    record: &[f64],
    dt: f64,
    eta: f64,
    cfg: &AdaptiveConfig,
    known: Option<&KnownParams>,
) -> Result<AdaptiveRun> {
    let mut est = OmegaEstimator::new(cfg.fft_window, cfg.fft_pad, cfg.lowpass_time, cfg.f_max);
    let mut det = Detector::new(cfg.detector.clone());
    let (mut omega, mut gamma, mut axis) = (cfg.omega_init, cfg.gamma_init, Axis::X);
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.fft_window + 1);
    let mut flat = Vec::with_capacity(cfg.fft_window);
    let (mut block_acc, mut block_len, mut blocks) = (0.0, 0usize, Vec::new());
    let mut rho = DensityMatrix::ground();
    let mut run = AdaptiveRun {
        states: Vec::with_capacity(record.len()),
        events: Vec::with_capacity(record.len()),
        detections: Vec::new(),
    };
    let sz = CMat2::pauli_z();

    for (t, &dy) in record.iter().enumerate() {
        let (h, g) = match known {
            Some(p) => (p.hamiltonian(t), p.gamma_at(t)),
            None => (axis.pauli().scale(omega), gamma),
        };
        let nu = (dy - record_drift(&sz, rho.mat(), g, eta) * dt) / dt.sqrt();
        rho = filter_step(&rho, &h, g, eta, dt, dy)?;
        run.states.push(rho);

        let detected = det.update(nu);
        window.push_back(dy);
        if window.len() > cfg.fft_window {
            window.pop_front();
        }
        block_acc += dy;
        block_len += 1;
        if block_len == cfg.gamma_block {
            blocks.push(block_acc);
            if cfg.gamma_history > 0 && blocks.len() * cfg.gamma_block > cfg.gamma_history {
                blocks.remove(0);
            }
            block_acc = 0.0;
            block_len = 0;
        }
        if detected {
            run.detections.push(t);
            window.clear();
            blocks.clear();
            block_acc = 0.0;
            block_len = 0;
            if cfg.toggle_axis {
                axis = Axis::Y;
            }
        }
        if known.is_none() {
            if window.len() == cfg.fft_window {
                flat.clear();
                flat.extend(window.iter().copied());
                omega = est.estimate(&flat, dt, omega);
            }
            if blocks.len() >= 2 {
                gamma = estimate_gamma(&blocks, cfg.gamma_block, dt, cfg.gamma_min, cfg.gamma_max);
            }
        }
        run.events.push(FilterEvent { step: t, omega, gamma, ema: det.ema, detected });
    }
    Ok(run)
}
