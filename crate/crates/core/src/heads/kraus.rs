use crate::error::{Error, Result};
use crate::qcore::{CMat2, DensityMatrix, KrausPair, C64};

/// Denominator stabilizer of the Kraus update.
pub const KRAUS_EPS: f64 = 1e-8;
/// A column is rank-deficient when its residual norm is at most this
/// fraction of `‖V‖_F`.
pub const QR_RANK_TOL: f64 = 1e-12;
/// Inputs this close to the Stiefel manifold are returned unchanged.
const STIEFEL_FIXED_POINT: f64 = 1e-14;

/// A 4×2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat42(pub [[C64; 2]; 4]);

impl CMat42 {
    pub fn zero() -> Self {
        CMat42([[C64::new(0.0, 0.0); 2]; 4])
    }

    pub fn column(&self, c: usize) -> [C64; 4] {
        [self.0[0][c], self.0[1][c], self.0[2][c], self.0[3][c]]
    }

    pub fn from_columns(a: [C64; 4], b: [C64; 4]) -> Self {
        CMat42([[a[0], b[0]], [a[1], b[1]], [a[2], b[2]], [a[3], b[3]]])
    }

    /// `V†V`
    pub fn gram(&self) -> CMat2 {
        let mut g = CMat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                g.0[i][j] = (0..4).map(|r| self.0[r][i].conj() * self.0[r][j]).sum();
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= s);
        m
    }
}

/// `‖V†V − I‖_F`
pub fn stiefel_error(v: &CMat42) -> f64 {
    (v.gram() - CMat2::identity()).frobenius_norm()
}

/// Arranges 16 raw outputs as `V[r][c] = o[2r + c] + i·o[8 + 2r + c]`.
pub fn build_v(o: &[f64]) -> Result<CMat42> {
    if o.len() != 16 {
        return Err(Error::Shape(format!("Kraus head needs 16 outputs, got {}", o.len())));
    }
    let mut v = CMat42::zero();
    for r in 0..4 {
        for c in 0..2 {
            v.0[r][c] = C64::new(o[2 * r + c], o[8 + 2 * r + c]);
        }
    }
    Ok(v)
}

fn norm(a: &[C64; 4]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Thin QR by modified Gram–Schmidt with one re-orthogonalization pass.
///
/// Both diagonal entries of `R` are column norms, hence real and positive,
/// which fixes the column phases. Already-orthonormal inputs are returned
/// unchanged so that the map is idempotent bit for bit.
pub fn thin_qr(v: &CMat42) -> Result<CMat42> {
    if stiefel_error(v) <= STIEFEL_FIXED_POINT {
        return Ok(*v);
    }
    let scale = v.frobenius_norm();
    let (a, mut w) = (v.column(0), v.column(1));
    let n1 = norm(&a);
    if !(n1 > QR_RANK_TOL * scale) {
        return Err(Error::Singular(format!("first Kraus column has norm {n1:e}")));
    }
    let q1 = a.map(|z| z / n1);
    for _ in 0..2 {
        let r: C64 = q1.iter().zip(&w).map(|(q, x)| q.conj() * x).sum();
        for (x, q) in w.iter_mut().zip(&q1) {
            *x -= q * r;
        }
    }
    let n2 = norm(&w);
    if !(n2 > QR_RANK_TOL * scale) {
        return Err(Error::Singular(format!("Kraus columns are dependent (residual {n2:e})")));
    }
    Ok(CMat42::from_columns(q1, w.map(|z| z / n2)))
}

/// Row blocks 0–1 and 2–3 of `Q`, so that `Σ K_i†K_i = Q†Q`.
pub fn kraus_from_q(q: &CMat42) -> KrausPair {
    let block = |r: usize| CMat2([q.0[r], q.0[r + 1]]);
    KrausPair::new(block(0), block(2))
}

/// `Σ K_i ρ K_i† / (Tr + eps)`, Hermitized and renormalized to unit trace.
pub fn kraus_update_with(rho: &DensityMatrix, k: &KrausPair, eps: f64) -> DensityMatrix {
    let s = k.apply_unnormalized(rho.mat());
    let m = s.scale(1.0 / (s.trace().re + eps)).hermitize();
    DensityMatrix::trusted(m.scale(1.0 / m.trace().re))
}

/// The Kraus update with the default stabilizer.
pub fn kraus_update(rho: &DensityMatrix, k: &KrausPair) -> DensityMatrix {
    kraus_update_with(rho, k, KRAUS_EPS)
}
