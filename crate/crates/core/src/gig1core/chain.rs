//! The block-structured transition matrix and its validation.

use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use super::ChainError;
use crate::blockseq::MatrixSeq;
use crate::numeric::linalg::{gth_stationary, strongly_connected};

/// Default tolerance for block row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Transition structure of a GI/G/1-type chain with level 0 of `m0` phases
/// and levels `k ≥ 1` of `m` phases.
///
/// * `b0 = B(0)`: level 0 to level 0.
/// * `b_up = {B(k); k ≥ 1}`: level 0 to level `k`.
/// * `b_down[k−1] = B(−k)`: level `k` to level 0, for `1 ≤ k ≤ b_max`.
/// * `a = {A(k); k ≥ −b_max}`: level `n` to level `n + k` inside levels ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Gig1Chain {
    m0: usize,
    m: usize,
    b0: DMatrix<f64>,
    b_up: MatrixSeq,
    b_down: Vec<DMatrix<f64>>,
    a: MatrixSeq,
}

/// Outcome of [`Gig1Chain::validate`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Stationary vector of `A = Σ_k A(k)`.
    pub pi: Vec<f64>,
    /// Mean drift `π Σ_k k A(k) e`.
    pub sigma: f64,
    /// Largest row-sum deviation found.
    pub row_sum_residual: f64,
    /// Whether the chain restricted to the first few levels is irreducible
    /// (with excursions above the window lumped into its top level).
    pub window_irreducible: bool,
    /// Mass dropped by upstream truncation in the stored sequences.
    pub tail_deficit: f64,
}

impl ValidationReport {
    /// `π` as a row vector.
    pub fn pi_row(&self) -> RowDVector<f64> {
        RowDVector::from_row_slice(&self.pi)
    }
}

impl Gig1Chain {
    /// Assembles a chain after checking block shapes.
    pub fn new(b0: DMatrix<f64>, b_up: MatrixSeq, b_down: Vec<DMatrix<f64>>, a: MatrixSeq) -> Result<Self, ChainError> {
        let m0 = b0.nrows();
        let m = a.rows();
        let dim = |what: &str| Err(ChainError::Dimension(what.to_string()));
        if b0.ncols() != m0 {
            return dim("B(0) must be square");
        }
        if a.cols() != m {
            return dim("A(k) must be square");
        }
        if b_up.rows() != m0 || b_up.cols() != m {
            return dim("B(k), k ≥ 1, must be M0 × M");
        }
        if b_up.k_min() < 1 {
            return dim("B(k) upward blocks start at k = 1");
        }
        if b_down.is_empty() {
            return dim("at least one downward block B(−1) is required");
        }
        if b_down.iter().any(|d| d.nrows() != m || d.ncols() != m0) {
            return dim("B(−k) must be M × M0");
        }
        let b_max = b_down.len() as i64;
        if a.k_min() < -b_max {
            return dim("A(k) has levels below −b_max");
        }
        if b0.iter().chain(b_down.iter().flat_map(|d| d.iter())).any(|v| !(*v >= 0.0)) {
            return dim("boundary blocks must be nonnegative");
        }
        Ok(Gig1Chain { m0, m, b0, b_up, b_down, a })
    }

    /// Phases at level 0.
    pub fn m0(&self) -> usize {
        self.m0
    }

    /// Phases at levels `k ≥ 1`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Maximum downward jump.
    pub fn b_max(&self) -> usize {
        self.b_down.len()
    }

    /// `B(0)`.
    pub fn b0(&self) -> &DMatrix<f64> {
        &self.b0
    }

    /// `{B(k); k ≥ 1}`.
    pub fn b_up(&self) -> &MatrixSeq {
        &self.b_up
    }

    /// `B(−k)` for `k = 1..=b_max`.
    pub fn b_down(&self, k: usize) -> &DMatrix<f64> {
        &self.b_down[k - 1]
    }

    /// All downward boundary blocks.
    pub fn b_down_all(&self) -> &[DMatrix<f64>] {
        &self.b_down
    }

    /// `{A(k); k ≥ −b_max}`.
    pub fn a(&self) -> &MatrixSeq {
        &self.a
    }

    /// `A(k)` for `k ∈ [lo, hi]`, zero below the support.
    pub(crate) fn a_blocks(&self, lo: i64, hi: i64) -> Result<Vec<DMatrix<f64>>, ChainError> {
        (lo..=hi).map(|k| self.a.at(k).map_err(ChainError::from)).collect()
    }

    /// Checks stochasticity, irreducibility of `A` and the drift condition.
    pub fn validate(&self) -> Result<ValidationReport, ChainError> {
        self.validate_with(ROW_SUM_TOL)
    }

    /// [`Gig1Chain::validate`] with a custom row-sum tolerance.
    pub fn validate_with(&self, tol: f64) -> Result<ValidationReport, ChainError> {
        let deficit = self.a.deficit() + self.b_up.deficit();
        let tol = tol + deficit;
        let mut worst = 0.0f64;
        let mut check = |block: String, sums: Vec<f64>| -> Result<(), ChainError> {
            let r = sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
            worst = worst.max(r);
            if r > tol {
                Err(ChainError::RowSum { block, residual: r })
            } else {
                Ok(())
            }
        };
        let level0: Vec<f64> = (0..self.m0).map(|i| self.b0.row(i).sum() + self.b_up.total().row(i).sum()).collect();
        check("level 0 (B(0) + Σ B(k))".into(), level0)?;
        let a_total = self.a.total().clone();
        check("A = Σ A(k)".into(), (0..self.m).map(|i| a_total.row(i).sum()).collect())?;
        for k in 1..=self.b_max() {
            let stay = self.a.overline_e(-(k as i64))?;
            let sums: Vec<f64> = (0..self.m).map(|i| self.b_down[k - 1].row(i).sum() + stay[i]).collect();
            check(format!("level {k} (B(−{k}) + Σ_{{l>−{k}}} A(l))"), sums)?;
        }
        if !strongly_connected(&a_total, 0.0) {
            return Err(ChainError::ReducibleA);
        }
        let pi = gth_stationary(&a_total).ok_or(ChainError::ReducibleA)?;
        let drift = self.a.first_moment_e()?;
        let sigma = (&pi * drift)[0];
        if !(sigma < 0.0) {
            return Err(ChainError::Unstable { sigma });
        }
        let window_irreducible = self.window_irreducible()?;
        Ok(ValidationReport {
            pi: pi.iter().copied().collect(),
            sigma,
            row_sum_residual: worst,
            window_irreducible,
            tail_deficit: deficit,
        })
    }

    fn window_irreducible(&self) -> Result<bool, ChainError> {
        let b = self.b_max() as i64;
        let levels = 2 * b + 2;
        let (m0, m) = (self.m0, self.m);
        let n = m0 + levels as usize * m;
        let off = |l: i64| if l == 0 { 0 } else { m0 + (l as usize - 1) * m };
        let mut adj = DMatrix::zeros(n, n);
        let mut put = |r0: usize, c0: usize, blk: &DMatrix<f64>| {
            for i in 0..blk.nrows() {
                for j in 0..blk.ncols() {
                    adj[(r0 + i, c0 + j)] += blk[(i, j)];
                }
            }
        };
        put(0, 0, &self.b0);
        for l in 1..levels {
            put(0, off(l), &self.b_up.at(l)?);
        }
        put(0, off(levels), &self.b_up.overline(levels - 1)?);
        for i in 1..=levels {
            if i <= b {
                put(off(i), 0, &self.b_down[i as usize - 1]);
            }
            for l in 1..levels {
                put(off(i), off(l), &self.a.at(l - i)?);
            }
            put(off(i), off(levels), &self.a.overline(levels - 1 - i)?);
        }
        Ok(strongly_connected(&adj, 0.0))
    }
}
