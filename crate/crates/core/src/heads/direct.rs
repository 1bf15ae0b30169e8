use crate::error::{Error, Result};
use crate::qcore::{CMat2, RawPrediction, C64};

use super::linear;

/// Traces with modulus at or below this produce the maximally mixed fallback.
pub const DIRECT_TRACE_FLOOR: f64 = 1e-12;
const DIRECT_EPS: f64 = 1e-8;

/// Interprets 8 outputs as re/im of a 2×2 matrix and divides by its
/// trace plus a sign-matched `1e-8`. The result is neither Hermitized nor
/// projected.
pub fn direct_from_outputs(o: &[f64]) -> Result<RawPrediction> {
    if o.len() != 8 {
        return Err(Error::Shape(format!("direct head needs 8 outputs, got {}", o.len())));
    }
    let m = CMat2::from_reals(o);
    let tr = m.trace();
    if tr.norm() <= DIRECT_TRACE_FLOOR {
        return Ok(RawPrediction { mat: CMat2::identity().scale(0.5), fallback: true });
    }
    // Same operation order as the tape version, so both agree bit for bit.
    let dr = tr.re + DIRECT_EPS.copysign(tr.re);
    let inv = 1.0 / (dr * dr + tr.im * tr.im);
    let (cr, ci) = (dr * inv, tr.im * inv);
    let mut out = CMat2::zero();
    for (o, z) in out.0.iter_mut().flatten().zip(m.0.iter().flatten()) {
        *o = C64::new(z.re * cr + z.im * ci, z.im * cr - z.re * ci);
    }
    Ok(RawPrediction::new(out))
}

pub fn direct_predict(h: &[f64], w: &[f64], b: &[f64]) -> Result<RawPrediction> {
    direct_from_outputs(&linear(w, b, h))
}
