//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// `e^{j·2π·turns}`.
#[inline]
pub fn cis(turns: f64) -> C64 {
    let (s, c) = (core::f64::consts::TAU * turns).sin_cos();
    C64::new(c, s)
}

/// Largest eigenvalue of `DᴴD` (the squared spectral norm of `D`) by power
/// iteration.
pub fn spectral_norm_sq(d: &CMatrix, max_iter: usize, tol: f64) -> f64 {
    if d.ncols() == 0 || d.nrows() == 0 {
        return 0.0;
    }
    let gram = d.adjoint() * d;
    power_iteration(&gram, max_iter, tol)
}

pub(crate) fn power_iteration(gram: &CMatrix, max_iter: usize, tol: f64) -> f64 {
    let n = gram.ncols();
    let mut v = CVector::from_element(n, C64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            // Start vector orthogonal to the range; fall back to the largest column.
            return gram.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        }
        let next = norm;
        v = w / C64::new(norm, 0.0);
        if (next - lambda).abs() <= tol * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // Rayleigh quotient sharpens the last estimate.
    let rq = v.dotc(&(gram * &v)).re;
    rq.max(lambda)
}

/// 2-norm condition number from the singular values; `inf` when rank deficient.
pub fn condition_number(d: &CMatrix) -> f64 {
    if d.ncols() == 0 {
        return f64::INFINITY;
    }
    let sv = d.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
