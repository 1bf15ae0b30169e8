use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// General 2×2 complex matrix, row-major. All products are unrolled.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CMat2(pub [[C64; 2]; 2]);

impl CMat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        CMat2([[a, b], [c, d]])
    }

    pub const fn zero() -> Self {
        CMat2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        CMat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        CMat2([[C64::new(a, 0.0), C64::new(b, 0.0)], [C64::new(c, 0.0), C64::new(d, 0.0)]])
    }

    pub const fn pauli_x() -> Self {
        CMat2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub const fn pauli_y() -> Self {
        CMat2([[ZERO, C64::new(0.0, -1.0)], [I, ZERO]])
    }

    pub const fn pauli_z() -> Self {
        CMat2([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]])
    }

    /// Real/imaginary parts flattened as `[re00, re01, re10, re11, im00, im01, im10, im11]`.
    pub fn to_reals(&self) -> [f64; 8] {
        let m = &self.0;
        [
            m[0][0].re, m[0][1].re, m[1][0].re, m[1][1].re,
            m[0][0].im, m[0][1].im, m[1][0].im, m[1][1].im,
        ]
    }

    pub fn from_reals(v: &[f64]) -> Self {
        assert_eq!(v.len(), 8, "a 2x2 complex matrix needs 8 reals");
        CMat2([
            [C64::new(v[0], v[4]), C64::new(v[1], v[5])],
            [C64::new(v[2], v[6]), C64::new(v[3], v[7])],
        ])
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.0[r][c]
    }

    #[inline]
    pub fn dagger(&self) -> Self {
        let m = &self.0;
        CMat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    #[inline]
    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    #[inline]
    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        let m = &self.0;
        CMat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    #[inline]
    pub fn scale_c(&self, s: C64) -> Self {
        let m = &self.0;
        CMat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    /// `[A, B] = AB − BA`
    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// `{A, B} = AB + BA`
    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    /// `‖M − M†‖_F`
    pub fn hermiticity_error(&self) -> f64 {
        (*self - self.dagger()).frobenius_norm()
    }

    /// `(M + M†)/2`
    pub fn hermitize(&self) -> Self {
        (*self + self.dagger()).scale(0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for CMat2 {
    type Output = CMat2;
    #[inline]
    fn add(self, o: CMat2) -> CMat2 {
        let (a, b) = (&self.0, &o.0);
        CMat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for CMat2 {
    type Output = CMat2;
    #[inline]
    fn sub(self, o: CMat2) -> CMat2 {
        let (a, b) = (&self.0, &o.0);
        CMat2([[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]])
    }
}

impl Neg for CMat2 {
    type Output = CMat2;
    fn neg(self) -> CMat2 {
        self.scale(-1.0)
    }
}

impl Mul for CMat2 {
    type Output = CMat2;
    #[inline]
    fn mul(self, o: CMat2) -> CMat2 {
        let (a, b) = (&self.0, &o.0);
        CMat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

/// Eigenvalues `(λ_min, λ_max)` of the Hermitian part of `m`.
///
/// Uses the half-difference form `tr/2 ± √(((a−d)/2)² + |b|²)`, which is the
/// same closed form as `(Tr ± √(Tr² − 4 det))/2` without the cancellation.
pub fn eigvals_hermitian_2x2(m: &CMat2) -> (f64, f64) {
    let h = m.hermitize();
    let a = h.0[0][0].re;
    let d = h.0[1][1].re;
    let b = h.0[0][1];
    let mid = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let disc = (half * half + b.norm_sqr()).sqrt();
    (mid - disc, mid + disc)
}
