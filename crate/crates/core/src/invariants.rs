//! Self-checks shared by `qtw check` and the acceptance suite: each returns
//! raw measurements and leaves the pass/fail thresholds to the caller.

use rayon::prelude::*;

use crate::ad::{grad_check, GradCheckReport, Tape};
use crate::backbones::{BackboneKind, ModelConfig};
use crate::baseline::lindblad_filter;
use crate::error::Result;
use crate::heads::{build_v, kraus_from_q, kraus_update, linear, thin_qr, stiefel_error, HeadKind};
use crate::model::Model;
use crate::qcore::{
    bloch_to_rho, eigvals_hermitian_2x2, fidelity_full, kraus_completeness_error, BlochVector, CMat2, DensityMatrix,
};
use crate::rng::{mix64, SplitMix64};
use crate::sim::{em_step_raw, simulate_with, DatasetSpec, StandardizationStats};
use crate::train::Sequence;

/// Worst values seen over a batch of random Kraus updates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StiefelSummary {
    pub cases: usize,
    pub max_stiefel: f64,
    pub max_completeness: f64,
    pub max_trace_error: f64,
    pub min_lambda: f64,
    pub max_hermiticity: f64,
}

pub fn random_state(rng: &mut SplitMix64) -> DensityMatrix {
    loop {
        let b = BlochVector::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        if b.norm() <= 1.0 {
            return bloch_to_rho(b).expect("inside the Bloch ball");
        }
    }
}

/// Draws `cases` random hidden vectors through a random linear head of
/// width `hidden`, projects to the Stiefel manifold and applies the channel
/// to a random state.
pub fn stiefel_suite(cases: usize, hidden: usize, seed: u64) -> Result<StiefelSummary> {
    let mut rng = SplitMix64::new(seed);
    let scale = 1.0 / (hidden as f64).sqrt();
    let w: Vec<f64> = (0..16 * hidden).map(|_| rng.uniform(-scale, scale)).collect();
    let b: Vec<f64> = (0..16).map(|_| rng.uniform(-scale, scale)).collect();
    let mut s = StiefelSummary { cases, min_lambda: f64::INFINITY, ..Default::default() };
    for _ in 0..cases {
        let h: Vec<f64> = (0..hidden).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let q = thin_qr(&build_v(&linear(&w, &b, &h))?)?;
        let k = kraus_from_q(&q);
        let out = kraus_update(&random_state(&mut rng), &k);
        let m = out.mat();
        s.max_stiefel = s.max_stiefel.max(stiefel_error(&q));
        s.max_completeness = s.max_completeness.max(kraus_completeness_error(&k));
        s.max_trace_error = s.max_trace_error.max((m.trace() - 1.0).norm());
        s.min_lambda = s.min_lambda.min(eigvals_hermitian_2x2(m).0);
        s.max_hermiticity = s.max_hermiticity.max(m.hermiticity_error());
    }
    Ok(s)
}

/// Finite-difference check of the full model loss on one short simulated
/// trajectory, jitter off.
pub fn model_grad_check(kind: BackboneKind, head: HeadKind, hidden: usize, steps: usize, seed: u64) -> Result<GradCheckReport> {
    let spec = DatasetSpec::default().with_steps(steps);
    let traj = crate::sim::simulate_trajectory(&spec.sample_params(seed, 0))?;
    let stats = StandardizationStats::from_trajectories(std::slice::from_ref(&traj))?;
    let seq = Sequence::from_trajectory(&traj, &stats);
    let model = Model::new(ModelConfig::new(kind, hidden), head)?;
    let params = model.init_params(seed);
    let carry = model.initial_carry(DensityMatrix::ground());
    let f = |tape: &mut Tape, p: &[f64]| Ok(model.window(tape, p, &seq.x, &seq.targets, &carry, None)?.loss);
    grad_check(f, &params, 1e-5)
}

/// Max |⟨σz⟩ − cos(2ωt)| over `[0, t_final]` for the unmonitored (γ = 0)
/// Euler integration at each step size.
pub fn rabi_errors(omega: f64, t_final: f64, dts: &[f64]) -> Result<Vec<f64>> {
    let h = CMat2::pauli_x().scale(omega);
    dts.iter()
        .map(|&dt| {
            let steps = (t_final / dt).round() as usize;
            let mut rho = *DensityMatrix::ground().mat();
            let mut worst: f64 = 0.0;
            for n in 1..=steps {
                rho = em_step_raw(&rho, &h, 0.0, 1.0, dt, 0.0)?.0;
                let z = (rho.get(0, 0) - rho.get(1, 1)).re;
                worst = worst.max((z - (2.0 * omega * n as f64 * dt).cos()).abs());
            }
            Ok(worst)
        })
        .collect()
}

/// Ensemble ⟨σz⟩ against the deterministic Lindblad solution at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsemblePoint {
    pub step: usize,
    pub mean: f64,
    pub std_error: f64,
    pub lindblad: f64,
}

/// Averages ⟨σz⟩ over `n` monitored trajectories under `H = ωσx` and
/// compares with RK4 Lindblad integration every `stride` steps.
pub fn ensemble_oracle(
    n: usize,
    gamma: f64,
    omega: f64,
    dt: f64,
    steps: usize,
    stride: usize,
    seed: u64,
) -> Result<Vec<EnsemblePoint>> {
    let h = CMat2::pauli_x().scale(omega);
    let runs = (0..n)
        .into_par_iter()
        .map(|i| {
            let (_, states, _) = simulate_with(DensityMatrix::ground(), steps, dt, 1.0, mix64(seed, i as u64), |_| (h, gamma))?;
            Ok(states.iter().map(|b| b.z).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = lindblad_filter(steps, dt, |_| (h, gamma))?;
    Ok((stride - 1..steps)
        .step_by(stride)
        .map(|t| {
            let mean = runs.iter().map(|z| z[t]).sum::<f64>() / n as f64;
            let var = runs.iter().map(|z| (z[t] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let r = reference[t].mat();
            EnsemblePoint { step: t, mean, std_error: (var / n as f64).sqrt(), lindblad: (r.get(0, 0) - r.get(1, 1)).re }
        })
        .collect())
}

/// Mean full fidelity of the known-parameter filter against the simulated
/// states, one value per trajectory of `spec` drawn from `seed`.
pub fn exact_filter_fidelities(spec: &DatasetSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let traj = crate::sim::simulate_trajectory(&spec.sample_params(seed, i))?;
            let states = crate::baseline::exact_filter(&traj)?;
            let mut total = 0.0;
            for (s, b) in states.iter().zip(&traj.states) {
                total += fidelity_full(s, &bloch_to_rho(*b)?)?;
            }
            Ok(total / traj.len() as f64)
        })
        .collect()
}
