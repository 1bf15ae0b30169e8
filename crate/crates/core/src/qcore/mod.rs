//! Fixed-size single-qubit linear algebra and the state metrics built on it.

mod cmat;
mod metrics;
mod state;

pub use cmat::{eigvals_hermitian_2x2, CMat2, C64};
pub use metrics::{
    bures_distance, bures_from_fidelity, fidelity, fidelity_full, fidelity_proxy,
    physicality_metrics, raw_fidelities, FidelityKind, Physicality, DET_CLAMP,
};
pub use state::{
    bloch_matrix, bloch_to_rho, kraus_completeness_error, mat_to_bloch, rho_to_bloch,
    BlochVector, DensityMatrix, KrausPair, RawPrediction, BLOCH_TOL, HERMITIAN_TOL, PSD_TOL,
    TRACE_TOL,
};

/// Projects a Hermitian unit-trace matrix onto the state space by clipping a
/// negative eigenvalue to zero and renormalizing.
///
/// For a 2×2 matrix with eigenvalues `λ₁ < 0 ≤ λ₂` the result is the pure
/// projector `(ρ − λ₁I)/(λ₂ − λ₁)`. Returns `None` when nothing was clipped.
pub fn clip_to_psd(m: &CMat2) -> Option<DensityMatrix> {
    let (lo, hi) = eigvals_hermitian_2x2(m);
    if lo >= 0.0 {
        return None;
    }
    let p = (*m - CMat2::identity().scale(lo)).scale(1.0 / (hi - lo)).hermitize();
    // Rounding can leave the trace a few ulps away from 1.
    let tr = p.trace().re;
    Some(DensityMatrix::trusted(p.scale(1.0 / tr)))
}
