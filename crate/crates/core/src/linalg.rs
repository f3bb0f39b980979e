//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// `a^H b`.
#[inline]
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.dotc(b)
}

#[inline]
pub fn norm_sqr(a: &CVector) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Returns `a / ‖a‖`, or `None` for the zero vector.
pub fn normalized(a: &CVector) -> Option<CVector> {
    let n = a.norm();
    if n > 0.0 && n.is_finite() {
        Some(a.unscale(n))
    } else {
        None
    }
}

/// Draws a vector with i.i.d. `CN(0, variance)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVector {
    let s = (variance / 2.0).sqrt();
    DVector::from_fn(len, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    })
}

/// Stacks vectors as the columns of a matrix.
pub fn columns(vs: &[CVector]) -> CMatrix {
    let rows = vs.first().map_or(0, |v| v.len());
    DMatrix::from_fn(rows, vs.len(), |r, c| vs[c][r])
}

/// Largest entry of `|A − A^H|`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Real-valued representation `[Re(h); Im(h)]`.
pub fn to_real(h: &CVector) -> Vec<f64> {
    h.iter().map(|z| z.re).chain(h.iter().map(|z| z.im)).collect()
}

/// Inverse of [`to_real`].
pub fn from_real(x: &[f64]) -> CVector {
    let n = x.len() / 2;
    DVector::from_fn(n, |k, _| Complex64::new(x[k], x[n + k]))
}
