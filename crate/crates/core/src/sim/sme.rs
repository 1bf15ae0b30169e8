use crate::error::{Error, Result};
use crate::qcore::{clip_to_psd, eigvals_hermitian_2x2, CMat2, DensityMatrix, C64};

/// Eigenvalues below this after a step are counted as PSD projections.
pub const PSD_REPORT_THRESHOLD: f64 = -1e-8;

/// Lindblad dissipator `D[L](ρ) = LρL† − ½{L†L, ρ}`.
pub fn dissipator(l: &CMat2, rho: &CMat2) -> CMat2 {
    let ld = l.dagger();
    *l * *rho * ld - (ld * *l).anticommutator(rho).scale(0.5)
}

/// Measurement back-action `H[L](ρ) = Lρ + ρL† − Tr(Lρ + ρL†)ρ`.
pub fn backaction(l: &CMat2, rho: &CMat2) -> CMat2 {
    let a = *l * *rho + *rho * l.dagger();
    a - rho.scale_c(a.trace())
}

/// `√(γη)·Tr[(L + L†)ρ]`, the drift of the homodyne record per unit time.
pub fn record_drift(l: &CMat2, rho: &CMat2, gamma: f64, eta: f64) -> f64 {
    (gamma * eta).sqrt() * ((*l + l.dagger()) * *rho).trace().re
}

/// One Euler–Maruyama step of the σz-monitored SME on an arbitrary matrix.
///
/// `dρ = −i[H, ρ]dt + γD[σz](ρ)dt + √(γη)H[σz](ρ)dW`, followed by
/// Hermitization and trace renormalization. No positivity guard: the
/// returned matrix may have a slightly negative eigenvalue.
/// Returns the updated matrix and the record increment
/// `dy = √(γη)Tr[(L + L†)ρ]dt + dW` evaluated on the pre-step state.
pub fn em_step_raw(
    rho: &CMat2,
    h: &CMat2,
    gamma: f64,
    eta: f64,
    dt: f64,
    dw: f64,
) -> Result<(CMat2, f64)> {
    let l = CMat2::pauli_z();
    let dy = record_drift(&l, rho, gamma, eta) * dt + dw;
    let unitary = h.commutator(rho).scale_c(C64::new(0.0, -1.0));
    let drift = unitary + dissipator(&l, rho).scale(gamma);
    let kick = backaction(&l, rho).scale((gamma * eta).sqrt() * dw);
    let next = (*rho + drift.scale(dt) + kick).hermitize();
    let tr = next.trace().re;
    if !(tr > 1e-12) || !next.is_finite() {
        return Err(Error::Integration { step: 0, reason: format!("post-step trace {tr:e}") });
    }
    Ok((next.scale(1.0 / tr), dy))
}

/// Result of a guarded step.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub rho: DensityMatrix,
    pub dy: f64,
    /// Smallest eigenvalue before projection, when the PSD guard fired.
    pub clipped: Option<f64>,
}

/// [`em_step_raw`] plus the positivity guard: any negative eigenvalue is
/// clipped to zero and the state renormalized, so the output always
/// validates as a [`DensityMatrix`].
pub fn em_step(
    rho: &DensityMatrix,
    h: &CMat2,
    gamma: f64,
    eta: f64,
    dt: f64,
    dw: f64,
) -> Result<StepOutcome> {
    let (next, dy) = em_step_raw(rho.mat(), h, gamma, eta, dt, dw)?;
    Ok(guard(next, dy))
}

fn guard(next: CMat2, dy: f64) -> StepOutcome {
    match clip_to_psd(&next) {
        Some(projected) => {
            let (lmin, _) = eigvals_hermitian_2x2(&next);
            StepOutcome { rho: projected, dy, clipped: Some(lmin) }
        }
        None => StepOutcome { rho: DensityMatrix::trusted(next), dy, clipped: None },
    }
}
