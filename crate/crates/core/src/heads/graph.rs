//! Tape versions of the heads. They mirror the value-level functions step
//! for step so that gradients follow by composition.

use super::direct::DIRECT_TRACE_FLOOR;
use super::kraus::{KRAUS_EPS, QR_RANK_TOL};
use crate::ad::{CVar, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::CMat2;

pub fn linear_tape(tape: &mut Tape, w: Var, b: Var, h: Var) -> Result<Var> {
    let wh = tape.matmul(w, h)?;
    tape.add(wh, b)
}

/// Complex column as (re, im) nodes.
type Col = (Var, Var);

fn col_norm(tape: &mut Tape, (re, im): Col) -> Result<Var> {
    let a = tape.dot(re, re)?;
    let b = tape.dot(im, im)?;
    let s = tape.add(a, b)?;
    Ok(tape.sqrt(s))
}

fn col_scale(tape: &mut Tape, (re, im): Col, s: Var) -> Result<Col> {
    Ok((tape.mul_scalar(re, s)?, tape.mul_scalar(im, s)?))
}

/// `w − q (q† w)`
fn project_out(tape: &mut Tape, q: Col, w: Col) -> Result<Col> {
    let (qr, qi) = q;
    let (wr, wi) = w;
    let a = tape.dot(qr, wr)?;
    let b = tape.dot(qi, wi)?;
    let rr = tape.add(a, b)?;
    let c = tape.dot(qr, wi)?;
    let d = tape.dot(qi, wr)?;
    let ri = tape.sub(c, d)?;
    let qr_rr = tape.mul_scalar(qr, rr)?;
    let qi_ri = tape.mul_scalar(qi, ri)?;
    let qr_ri = tape.mul_scalar(qr, ri)?;
    let qi_rr = tape.mul_scalar(qi, rr)?;
    let pr = tape.sub(qr_rr, qi_ri)?;
    let pi = tape.add(qr_ri, qi_rr)?;
    Ok((tape.sub(wr, pr)?, tape.sub(wi, pi)?))
}

/// Thin QR of the 4×2 matrix encoded by 16 head outputs. Returns `Q`
/// column-stacked as `(re, im)` vectors of length 8.
pub fn thin_qr_tape(tape: &mut Tape, o: Var) -> Result<(Var, Var)> {
    if o.len() != 16 {
        return Err(Error::Shape(format!("Kraus head needs 16 outputs, got {}", o.len())));
    }
    let scale = tape.value(o).iter().map(|x| x * x).sum::<f64>().sqrt();
    let a = (tape.gather(o, &[0, 2, 4, 6], 4, 1)?, tape.gather(o, &[8, 10, 12, 14], 4, 1)?);
    let mut w = (tape.gather(o, &[1, 3, 5, 7], 4, 1)?, tape.gather(o, &[9, 11, 13, 15], 4, 1)?);

    let n1 = col_norm(tape, a)?;
    if !(tape.scalar(n1) > QR_RANK_TOL * scale) {
        return Err(Error::Singular(format!("first Kraus column has norm {:e}", tape.scalar(n1))));
    }
    let inv1 = tape.reciprocal(n1);
    let q1 = col_scale(tape, a, inv1)?;
    for _ in 0..2 {
        w = project_out(tape, q1, w)?;
    }
    let n2 = col_norm(tape, w)?;
    if !(tape.scalar(n2) > QR_RANK_TOL * scale) {
        return Err(Error::Singular(format!("Kraus columns are dependent (residual {:e})", tape.scalar(n2))));
    }
    let inv2 = tape.reciprocal(n2);
    let q2 = col_scale(tape, w, inv2)?;
    Ok((tape.concat(q1.0, q2.0)?, tape.concat(q1.1, q2.1)?))
}

/// One Kraus update of `rho` driven by 16 head outputs.
pub fn kraus_step_tape(tape: &mut Tape, o: Var, rho: CVar) -> Result<CVar> {
    let (qr, qi) = thin_qr_tape(tape, o)?;
    // Q column-stacked: Q[r][c] sits at index 4c + r.
    let k = |tape: &mut Tape, idx: &[usize]| -> Result<CVar> {
        CVar::new(tape.gather(qr, idx, 2, 2)?, tape.gather(qi, idx, 2, 2)?)
    };
    let k1 = k(tape, &[0, 4, 1, 5])?;
    let k2 = k(tape, &[2, 6, 3, 7])?;
    let a = CVar::matmul(tape, k1, rho)?;
    let a = CVar::matmul_dagger(tape, a, k1)?;
    let b = CVar::matmul(tape, k2, rho)?;
    let b = CVar::matmul_dagger(tape, b, k2)?;
    let s = CVar::add(tape, a, b)?;
    let (tr, _) = CVar::trace(tape, s)?;
    let den = tape.add_const(tr, KRAUS_EPS);
    let inv = tape.reciprocal(den);
    let m = CVar::scale(tape, s, inv)?;
    let m = CVar::hermitize(tape, m)?;
    let (tr2, _) = CVar::trace(tape, m)?;
    let inv2 = tape.reciprocal(tr2);
    CVar::scale(tape, m, inv2)
}

/// Direct head on the tape. Returns the trace-normalized raw matrix and
/// whether the maximally mixed fallback replaced it.
pub fn direct_step_tape(tape: &mut Tape, o: Var) -> Result<(CVar, bool)> {
    if o.len() != 8 {
        return Err(Error::Shape(format!("direct head needs 8 outputs, got {}", o.len())));
    }
    let v = tape.value(o);
    let (tr_re, tr_im) = (v[0] + v[3], v[4] + v[7]);
    if tr_re.hypot(tr_im) <= DIRECT_TRACE_FLOOR {
        return Ok((CVar::constant(tape, &CMat2::identity().scale(0.5)), true));
    }
    let re = tape.gather(o, &[0, 1, 2, 3], 2, 2)?;
    let im = tape.gather(o, &[4, 5, 6, 7], 2, 2)?;
    let m = CVar::new(re, im)?;
    let (tr, ti) = CVar::trace(tape, m)?;
    // M / d = M·conj(d) / |d|² with d = Tr + ε·sgn(Re Tr).
    let dr = tape.add_const(tr, 1e-8f64.copysign(tr_re));
    let a = tape.mul(dr, dr)?;
    let b = tape.mul(ti, ti)?;
    let n2 = tape.add(a, b)?;
    let inv = tape.reciprocal(n2);
    let cr = tape.mul(dr, inv)?;
    let ci = tape.mul(ti, inv)?;
    // (x + iy)(cr − i·ci) = (x·cr + y·ci) + i(y·cr − x·ci)
    let xr = tape.mul_scalar(m.re, cr)?;
    let yi = tape.mul_scalar(m.im, ci)?;
    let yr = tape.mul_scalar(m.im, cr)?;
    let xi = tape.mul_scalar(m.re, ci)?;
    let out = CVar::new(tape.add(xr, yi)?, tape.sub(yr, xi)?)?;
    Ok((out, false))
}

/// `‖P − T‖_F²` over all eight real components.
pub fn frobenius_loss_tape(tape: &mut Tape, pred: CVar, target: &CMat2) -> Result<Var> {
    let t = CVar::constant(tape, target);
    let d = CVar::sub(tape, pred, t)?;
    let a = tape.dot(d.re, d.re)?;
    let b = tape.dot(d.im, d.im)?;
    tape.add(a, b)
}
