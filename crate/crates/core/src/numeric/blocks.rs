//! Row-major flat square blocks for convolution-heavy loops.

use nalgebra::DMatrix;

/// Row-major copy of `m`.
pub fn to_flat(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// `n × n` matrix from a row-major slice.
pub fn from_flat(v: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, &v[..n * n])
}

/// `out += a · b` for row-major `n × n` blocks.
#[inline]
pub fn mul_acc(out: &mut [f64], a: &[f64], b: &[f64], n: usize) {
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for l in 0..n {
            let ail = a[i * n + l];
            if ail == 0.0 {
                continue;
            }
            let brow = &b[l * n..(l + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += ail * bv;
            }
        }
    }
}

/// `out += s · a`.
#[inline]
pub fn axpy(out: &mut [f64], s: f64, a: &[f64]) {
    for (o, v) in out.iter_mut().zip(a) {
        *o += s * v;
    }
}

/// Largest row sum of a row-major `n × n` block.
pub fn max_row_sum(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum::<f64>()).fold(0.0, f64::max)
}

/// Truncated convolution `(a ∗ b)(k)` for `k = 0..levels`, both stored as
/// consecutive `n × n` blocks.
pub fn convolve_truncated(a: &[f64], b: &[f64], n: usize, levels: usize) -> Vec<f64> {
    let sz = n * n;
    let mut out = vec![0.0; levels * sz];
    let nonzero: Vec<bool> = (0..levels).map(|k| a[k * sz..(k + 1) * sz].iter().any(|v| *v != 0.0)).collect();
    for k in 0..levels {
        let dst = &mut out[k * sz..(k + 1) * sz];
        for i in 0..=k {
            if nonzero[i] {
                mul_acc(dst, &a[i * sz..(i + 1) * sz], &b[(k - i) * sz..(k - i + 1) * sz], n);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip_and_product() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.0]);
        let mut out = vec![0.0; 4];
        mul_acc(&mut out, &to_flat(&a), &to_flat(&b), 2);
        assert_eq!(from_flat(&out, 2), &a * &b);
    }
}
