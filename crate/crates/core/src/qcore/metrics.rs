use super::cmat::{eigvals_hermitian_2x2, CMat2};
use super::state::{DensityMatrix, RawPrediction};
use crate::error::{Error, Result};

/// Determinants above this (but below zero) are treated as rounding noise.
pub const DET_CLAMP: f64 = -1e-12;

/// Which fidelity a headline number was computed with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FidelityKind {
    /// `Tr(ρσ)`; exact when either state is pure.
    Proxy,
    /// `Tr(ρσ) + 2√(det ρ · det σ)`, the exact single-qubit Uhlmann fidelity.
    Full,
}

pub fn fidelity_proxy(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    (*rho.mat() * *sigma.mat()).trace().re.clamp(0.0, 1.0)
}

pub fn fidelity_full(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let overlap = (*rho.mat() * *sigma.mat()).trace().re;
    let cross = clamp_det(rho.det())? * clamp_det(sigma.det())?;
    Ok((overlap + 2.0 * cross.sqrt()).clamp(0.0, 1.0))
}

pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix, kind: FidelityKind) -> Result<f64> {
    match kind {
        FidelityKind::Proxy => Ok(fidelity_proxy(rho, sigma)),
        FidelityKind::Full => fidelity_full(rho, sigma),
    }
}

fn clamp_det(d: f64) -> Result<f64> {
    if d < DET_CLAMP {
        Err(Error::Domain(format!("negative determinant {d:e} in fidelity")))
    } else {
        Ok(d.max(0.0))
    }
}

/// Proxy and full fidelity of an unconstrained prediction against a state.
///
/// Raw predictions can be indefinite, so the determinant product is floored at
/// zero instead of raising; both values are clamped to `[0, 1]`.
pub fn raw_fidelities(pred: &RawPrediction, truth: &DensityMatrix) -> (f64, f64) {
    let overlap = (pred.mat * *truth.mat()).trace().re;
    let cross = (pred.mat.det().re * truth.det()).max(0.0);
    (overlap.clamp(0.0, 1.0), (overlap + 2.0 * cross.sqrt()).clamp(0.0, 1.0))
}

/// `d_B = √(2(1 − √F))` for a fidelity value.
pub fn bures_from_fidelity(f: f64) -> f64 {
    (2.0 * (1.0 - f.clamp(0.0, 1.0).sqrt())).max(0.0).sqrt()
}

pub fn bures_distance(rho: &DensityMatrix, sigma: &DensityMatrix, kind: FidelityKind) -> Result<f64> {
    Ok(bures_from_fidelity(fidelity(rho, sigma, kind)?))
}

/// Trace error, positivity violation and Hermiticity error of a prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Physicality {
    pub v_tr: f64,
    pub v_psd: f64,
    pub v_herm: f64,
    pub lambda_min: f64,
}

pub fn physicality_metrics(m: &CMat2) -> Physicality {
    let (lambda_min, _) = eigvals_hermitian_2x2(m);
    Physicality {
        v_tr: (m.trace() - 1.0).norm(),
        v_psd: (-lambda_min).max(0.0),
        v_herm: m.hermiticity_error(),
        lambda_min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{bloch_to_rho, BlochVector};

    #[test]
    fn fidelity_examples() {
        let g = DensityMatrix::ground();
        let e = DensityMatrix::excited();
        let mm = DensityMatrix::maximally_mixed();
        assert_eq!(fidelity_full(&g, &g).unwrap(), 1.0);
        assert_eq!(fidelity_full(&mm, &mm).unwrap(), 1.0);
        assert_eq!(fidelity_proxy(&g, &e), 0.0);
        assert_eq!(fidelity_full(&g, &e).unwrap(), 0.0);
        assert_eq!(fidelity_full(&g, &mm).unwrap(), 0.5);
        assert_eq!(fidelity_proxy(&g, &mm), 0.5);
    }

    #[test]
    fn fidelity_is_symmetric() {
        let a = bloch_to_rho(BlochVector::new(0.3, -0.2, 0.5)).unwrap();
        let b = bloch_to_rho(BlochVector::new(-0.1, 0.6, 0.2)).unwrap();
        assert!((fidelity_full(&a, &b).unwrap() - fidelity_full(&b, &a).unwrap()).abs() < 1e-15);
        assert!((fidelity_proxy(&a, &b) - fidelity_proxy(&b, &a)).abs() < 1e-15);
    }

    #[test]
    fn bures_examples() {
        let g = DensityMatrix::ground();
        let e = DensityMatrix::excited();
        let mm = DensityMatrix::maximally_mixed();
        assert_eq!(bures_distance(&g, &g, FidelityKind::Full).unwrap(), 0.0);
        assert!((bures_distance(&g, &e, FidelityKind::Full).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        // √(2(1 − √0.5))
        let d = bures_distance(&g, &mm, FidelityKind::Full).unwrap();
        assert!((d - 0.765_366_864_730_179_8).abs() < 1e-12, "{d}");
    }

    #[test]
    fn physicality_examples() {
        let p = physicality_metrics(DensityMatrix::maximally_mixed().mat());
        assert_eq!((p.v_tr, p.v_psd, p.v_herm), (0.0, 0.0, 0.0));
        let p = physicality_metrics(&CMat2::real(1.5, 0.0, 0.0, 0.0));
        assert_eq!((p.v_tr, p.v_psd, p.v_herm), (0.5, 0.0, 0.0));
        let p = physicality_metrics(&CMat2::real(1.2, 0.0, 0.0, -0.2));
        assert!(p.v_tr < 1e-15);
        assert!((p.v_psd - 0.2).abs() < 1e-15);
        assert_eq!(p.v_herm, 0.0);
    }

    #[test]
    fn strongly_negative_determinant_is_a_domain_error() {
        let bad = DensityMatrix::trusted(CMat2::real(1.2, 0.0, 0.0, -0.2));
        assert!(fidelity_full(&bad, &DensityMatrix::ground()).is_err());
    }
}
