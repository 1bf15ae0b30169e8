use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::CMat2;

/// A complex matrix on the tape as a pair of equally-shaped real nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CVar {
    pub re: Var,
    pub im: Var,
}

impl CVar {
    pub fn new(re: Var, im: Var) -> Result<Self> {
        if re.rows() != im.rows() || re.cols() != im.cols() {
            return Err(Error::Shape("real and imaginary parts differ in shape".into()));
        }
        Ok(CVar { re, im })
    }

    pub fn constant(tape: &mut Tape, m: &CMat2) -> CVar {
        let v = m.to_reals();
        let re = tape.constant(&v[..4], 2, 2).expect("2x2");
        let im = tape.constant(&v[4..], 2, 2).expect("2x2");
        CVar { re, im }
    }

    pub fn value(&self, tape: &Tape) -> CMat2 {
        let mut v = [0.0; 8];
        v[..4].copy_from_slice(tape.value(self.re));
        v[4..].copy_from_slice(tape.value(self.im));
        CMat2::from_reals(&v)
    }

    pub fn add(tape: &mut Tape, a: CVar, b: CVar) -> Result<CVar> {
        Ok(CVar { re: tape.add(a.re, b.re)?, im: tape.add(a.im, b.im)? })
    }

    pub fn sub(tape: &mut Tape, a: CVar, b: CVar) -> Result<CVar> {
        Ok(CVar { re: tape.sub(a.re, b.re)?, im: tape.sub(a.im, b.im)? })
    }

    /// `(A_r + iA_i)(B_r + iB_i)` with four real products.
    pub fn matmul(tape: &mut Tape, a: CVar, b: CVar) -> Result<CVar> {
        let rr = tape.matmul(a.re, b.re)?;
        let ii = tape.matmul(a.im, b.im)?;
        let ri = tape.matmul(a.re, b.im)?;
        let ir = tape.matmul(a.im, b.re)?;
        Ok(CVar { re: tape.sub(rr, ii)?, im: tape.add(ri, ir)? })
    }

    /// `A B†` without materializing the adjoint.
    pub fn matmul_dagger(tape: &mut Tape, a: CVar, b: CVar) -> Result<CVar> {
        let bt_re = tape.transpose(b.re);
        let bt_im = tape.transpose(b.im);
        let rr = tape.matmul(a.re, bt_re)?;
        let ii = tape.matmul(a.im, bt_im)?;
        let ir = tape.matmul(a.im, bt_re)?;
        let ri = tape.matmul(a.re, bt_im)?;
        Ok(CVar { re: tape.add(rr, ii)?, im: tape.sub(ir, ri)? })
    }

    pub fn dagger(tape: &mut Tape, a: CVar) -> CVar {
        let re = tape.transpose(a.re);
        let t = tape.transpose(a.im);
        CVar { re, im: tape.neg(t) }
    }

    /// Diagonal sum of a square matrix as (real, imaginary) scalars.
    pub fn trace(tape: &mut Tape, a: CVar) -> Result<(Var, Var)> {
        let n = a.re.rows();
        if a.re.cols() != n {
            return Err(Error::Shape("trace of a non-square matrix".into()));
        }
        let diag: Vec<usize> = (0..n).map(|i| i * n + i).collect();
        let dr = tape.gather(a.re, &diag, n, 1)?;
        let di = tape.gather(a.im, &diag, n, 1)?;
        Ok((tape.sum(dr), tape.sum(di)))
    }

    /// Multiplies by a real scalar node.
    pub fn scale(tape: &mut Tape, a: CVar, s: Var) -> Result<CVar> {
        Ok(CVar { re: tape.mul_scalar(a.re, s)?, im: tape.mul_scalar(a.im, s)? })
    }

    /// `(A + A†)/2`
    pub fn hermitize(tape: &mut Tape, a: CVar) -> Result<CVar> {
        let rt = tape.transpose(a.re);
        let it = tape.transpose(a.im);
        let re = tape.add(a.re, rt)?;
        let im = tape.sub(a.im, it)?;
        Ok(CVar { re: tape.scale(re, 0.5), im: tape.scale(im, 0.5) })
    }
}

impl From<CVar> for (Var, Var) {
    fn from(c: CVar) -> Self {
        (c.re, c.im)
    }
}
