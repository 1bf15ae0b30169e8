use serde::{Deserialize, Serialize};

use super::cmat::{eigvals_hermitian_2x2, CMat2, C64};
use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const BLOCH_TOL: f64 = 1e-9;

/// A validated single-qubit state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(CMat2);

impl DensityMatrix {
    pub fn new(mat: CMat2) -> Result<Self> {
        let herm = mat.hermiticity_error();
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::Domain(format!("not Hermitian (‖ρ−ρ†‖_F = {herm:e})")));
        }
        let tr = (mat.trace() - 1.0).norm();
        if !(tr <= TRACE_TOL) {
            return Err(Error::Domain(format!("trace deviates from 1 by {tr:e}")));
        }
        let (lmin, _) = eigvals_hermitian_2x2(&mat);
        if !(lmin >= -PSD_TOL) {
            return Err(Error::Domain(format!("negative eigenvalue {lmin:e}")));
        }
        Ok(DensityMatrix(mat))
    }

    /// Wraps a matrix the caller has constructed to be a state.
    pub(crate) fn trusted(mat: CMat2) -> Self {
        DensityMatrix(mat)
    }

    /// `|0⟩⟨0|`
    pub fn ground() -> Self {
        DensityMatrix(CMat2::real(1.0, 0.0, 0.0, 0.0))
    }

    pub fn excited() -> Self {
        DensityMatrix(CMat2::real(0.0, 0.0, 0.0, 1.0))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(CMat2::real(0.5, 0.0, 0.0, 0.5))
    }

    #[inline]
    pub fn mat(&self) -> &CMat2 {
        &self.0
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Determinant; real for Hermitian matrices.
    pub fn det(&self) -> f64 {
        self.0.det().re
    }
}

/// Output of an unconstrained head. No invariants; violations are measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawPrediction {
    pub mat: CMat2,
    /// Set when the trace guard fired and the maximally mixed fallback was emitted.
    pub fallback: bool,
}

impl RawPrediction {
    pub fn new(mat: CMat2) -> Self {
        RawPrediction { mat, fallback: false }
    }
}

impl From<DensityMatrix> for RawPrediction {
    fn from(d: DensityMatrix) -> Self {
        RawPrediction::new(d.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, o: &BlochVector) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2) + (self.z - o.z).powi(2)).sqrt()
    }
}

/// `ρ = (I + r·σ)/2`
pub fn bloch_to_rho(b: BlochVector) -> Result<DensityMatrix> {
    let n = b.norm();
    if !(n <= 1.0 + BLOCH_TOL) {
        return Err(Error::Domain(format!("Bloch vector norm {n} exceeds 1")));
    }
    Ok(DensityMatrix::trusted(bloch_matrix(b)))
}

/// The matrix `(I + r·σ)/2` for any `r`; unit trace and Hermitian by construction.
pub fn bloch_matrix(b: BlochVector) -> CMat2 {
    CMat2::new(
        C64::new(0.5 * (1.0 + b.z), 0.0),
        C64::new(0.5 * b.x, -0.5 * b.y),
        C64::new(0.5 * b.x, 0.5 * b.y),
        C64::new(0.5 * (1.0 - b.z), 0.0),
    )
}

/// `r_k = Tr(σ_k ρ)`
pub fn rho_to_bloch(rho: &DensityMatrix) -> BlochVector {
    mat_to_bloch(rho.mat())
}

pub fn mat_to_bloch(m: &CMat2) -> BlochVector {
    let m = &m.0;
    BlochVector {
        x: m[0][1].re + m[1][0].re,
        y: m[1][0].im - m[0][1].im,
        z: m[0][0].re - m[1][1].re,
    }
}

/// Two single-qubit Kraus operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrausPair {
    pub k1: CMat2,
    pub k2: CMat2,
}

impl KrausPair {
    pub fn new(k1: CMat2, k2: CMat2) -> Self {
        KrausPair { k1, k2 }
    }

    /// `Σ K_i ρ K_i†` without normalization.
    pub fn apply_unnormalized(&self, rho: &CMat2) -> CMat2 {
        self.k1 * *rho * self.k1.dagger() + self.k2 * *rho * self.k2.dagger()
    }
}

/// `‖Σ K_i† K_i − I‖_F`
pub fn kraus_completeness_error(k: &KrausPair) -> f64 {
    (k.k1.dagger() * k.k1 + k.k2.dagger() * k.k2 - CMat2::identity()).frobenius_norm()
}
