//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, RowDVector};

/// Row sums `M e`.
pub fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

/// Infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Column vector of ones.
pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

/// Stationary vector of an irreducible stochastic (or substochastic-rounded)
/// matrix via the Grassmann–Taksar–Heyman elimination.
///
/// Off-diagonal entries drive the computation; the diagonal is ignored and
/// each row is treated as stochastic. Returns `None` if a pivot vanishes,
/// which happens when the matrix is reducible.
pub fn gth_stationary(p: &DMatrix<f64>) -> Option<RowDVector<f64>> {
    let n = p.nrows();
    assert_eq!(n, p.ncols());
    if n == 1 {
        return Some(RowDVector::from_element(1, 1.0));
    }
    let mut a = p.clone();
    for i in 0..n {
        a[(i, i)] = 0.0;
    }
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if s <= 0.0 || !s.is_finite() {
            return None;
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik != 0.0 {
                for j in 0..k {
                    if i != j {
                        a[(i, j)] += aik * a[(k, j)];
                    }
                }
            }
        }
    }
    let mut x = RowDVector::zeros(n);
    x[0] = 1.0;
    for k in 1..n {
        x[k] = (0..k).map(|i| x[i] * a[(i, k)]).sum();
    }
    let total = x.sum();
    Some(x / total)
}

/// States of the unique closed class of the digraph `p[(i,j)] > 0`, or
/// `None` when there are several.
fn closed_class(p: &DMatrix<f64>) -> Option<Vec<usize>> {
    let n = p.nrows();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = i == j || p[(i, j)] > 0.0;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let closed: Vec<usize> = (0..n).filter(|&i| (0..n).all(|j| !reach[i][j] || reach[j][i])).collect();
    let first = *closed.first()?;
    closed.iter().all(|&j| reach[first][j]).then_some(closed)
}

/// Stationary vector of a stochastic matrix with a single closed class:
/// GTH on that class, zero mass on transient states.
pub fn single_class_stationary(p: &DMatrix<f64>) -> Option<RowDVector<f64>> {
    let n = p.nrows();
    let closed = closed_class(p)?;
    if closed.len() == n {
        return gth_stationary(p);
    }
    let sub = DMatrix::from_fn(closed.len(), closed.len(), |i, j| p[(closed[i], closed[j])]);
    let x = gth_stationary(&sub)?;
    let mut out = RowDVector::zeros(n);
    for (i, &s) in closed.iter().enumerate() {
        out[s] = x[i];
    }
    Some(out)
}

/// Stationary vector of an irreducible generator `Q` (rows summing to zero).
pub fn generator_stationary(q: &DMatrix<f64>) -> Option<RowDVector<f64>> {
    let n = q.nrows();
    let mut p = q.clone();
    for i in 0..n {
        p[(i, i)] = 0.0;
    }
    gth_stationary(&p)
}

/// `I − M` inverted through LU; `None` when singular.
pub fn inv_i_minus(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    (DMatrix::identity(n, n) - m).try_inverse()
}

/// Strong connectivity of the digraph with an edge `i→j` wherever `adj[(i,j)] > thresh`.
pub fn strongly_connected(adj: &DMatrix<f64>, thresh: f64) -> bool {
    let n = adj.nrows();
    if n == 0 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { adj[(i, j)] } else { adj[(j, i)] };
                if w > thresh && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Spectral radius from the dense eigenvalues.
pub fn spectral_radius_nonneg(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let eig = m.clone().complex_eigenvalues();
    eig.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gth_two_state() {
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7]);
        let x = gth_stationary(&p).unwrap();
        assert!((x[0] - 0.75).abs() < 1e-15);
        assert!((x[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gth_detects_reducible() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.7]);
        // State 0 is absorbing; the vector exists but state 1 has zero mass.
        let x = gth_stationary(&p).unwrap();
        assert!(x[1].abs() < 1e-15);
        let q = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.0, 1.0]);
        assert!(gth_stationary(&q).is_none());
    }

    #[test]
    fn single_class_ignores_transient_states() {
        let q = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.0, 0.6, 0.4, 0.0, 0.8, 0.2]);
        assert!(gth_stationary(&q).is_none());
        let x = single_class_stationary(&q).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((x[2] - 1.0 / 3.0).abs() < 1e-15);
        let two = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(single_class_stationary(&two).is_none());
    }

    #[test]
    fn generator_two_state() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        let x = generator_stationary(&q).unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15);
    }
}
