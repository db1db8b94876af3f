//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Default relative tolerance used by the library.
pub const DEFAULT_REL_TOL: f64 = 1e-9;
/// Absolute floor below which the error estimate is always accepted.
pub const DEFAULT_ABS_FLOOR: f64 = 1e-300;

const MAX_INTERVALS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Failure of the adaptive integrator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    /// The subdivision budget ran out before the tolerance was met.
    #[error("quadrature did not converge: estimate {value:e}, error {error:e} after {intervals} intervals")]
    NotConverged {
        /// Best estimate reached.
        value: f64,
        /// Estimated absolute error.
        error: f64,
        /// Number of intervals used.
        intervals: usize,
    },
    /// The integrand produced a non-finite value.
    #[error("integrand is not finite at x = {0}")]
    NonFinite(f64),
}

/// Value and error estimate of a converged integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    /// Integral estimate.
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Piece, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite(center));
    }
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !f1.is_finite() {
            return Err(QuadError::NonFinite(center - dx));
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite(center + dx));
        }
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    Ok(Piece { a, b, value, error })
}

/// Integrates `f` over `[a, b]` until the estimated error is below
/// `max(rel_tol·|I|, abs_floor)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<Quadrature, QuadError> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, a, b)?;
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    while err > (rel_tol * total.abs()).max(abs_floor) {
        if heap.len() >= MAX_INTERVALS {
            return Err(QuadError::NotConverged { value: total, error: err, intervals: heap.len() });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            return Err(QuadError::NotConverged { value: total, error: err, intervals: heap.len() });
        }
        let left = kronrod(&f, worst.a, mid)?;
        let right = kronrod(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to remove drift from incremental updates.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(Quadrature { value, error })
}

/// Integrates over consecutive breakpoints, sharing one relative tolerance.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_floor: f64,
) -> Result<Quadrature, QuadError> {
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        let q = integrate(&f, w[0], w[1], rel_tol, abs_floor)?;
        value += q.value;
        error += q.error;
    }
    Ok(Quadrature { value, error })
}

/// Integrates over `[a, ∞)` through the substitution `x = a + t/(1−t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<Quadrature, QuadError> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(a + t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, rel_tol, abs_floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12, 1e-300).unwrap();
        assert!((q.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let q = integrate_to_infinity(|x| (-x).exp(), 0.0, 1e-11, 1e-300).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn peaked_integrand() {
        let q = integrate(|x| (-(x - 0.3) * (x - 0.3) * 1e4).exp(), 0.0, 1.0, 1e-10, 1e-300).unwrap();
        let exact = (std::f64::consts::PI / 1e4).sqrt();
        assert!((q.value - exact).abs() / exact < 1e-9);
    }
}
