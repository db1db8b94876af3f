//! Level-indexed matrix sequences: tails, double tails, convolutions and
//! renewal (geometric) sums.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::heavytail::{DiscreteDist, DistError};
use crate::numeric::linalg::{inf_norm, inv_i_minus, ones, spectral_radius_nonneg};

/// Errors from matrix-sequence algebra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    /// Blocks have inconsistent shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A block has a negative or non-finite entry.
    #[error("entry {value} at level {level} is negative or not finite")]
    InvalidEntry {
        /// Level of the offending block.
        level: i64,
        /// Offending value.
        value: f64,
    },
    /// The level lies beyond what the tail descriptor can reconstruct.
    #[error("level {k} lies beyond the stored horizon {k_max} of an aggregate tail")]
    BeyondHorizon {
        /// Requested level.
        k: i64,
        /// Last stored level.
        k_max: i64,
    },
    /// A required sum diverges.
    #[error("sum diverges: {0}")]
    NotSummable(String),
    /// The geometric sum requires `ρ(R) < 1`.
    #[error("stability condition violated: spectral radius of the summed sequence is {0} (must be < 1)")]
    Unstable(f64),
    /// The operation needs a parametric tail descriptor.
    #[error("operation requires a parametric (rank-one) tail: {0}")]
    MissingParametricTail(String),
    /// Error from the underlying scalar distribution.
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// What lies beyond the explicitly stored levels.
#[derive(Debug, Clone, PartialEq)]
pub enum SeqTail {
    /// Nothing: the sequence vanishes beyond `k_max`.
    None,
    /// `M(k) = v wᵀ P(T = k)` for `k > k_max`.
    RankOne {
        /// Column factor.
        v: DVector<f64>,
        /// Row factor.
        w: DVector<f64>,
        /// Scalar law `T` supplying the level profile.
        dist: DiscreteDist,
    },
    /// Only aggregates of the tail are known.
    Aggregate {
        /// `Σ_{k>k_max} M(k)`.
        mass: DMatrix<f64>,
        /// `Σ_{k>k_max} (k − k_max) M(k) e`, when known.
        excess: Option<DVector<f64>>,
    },
}

/// A family `{M(k)}` of nonnegative `rows × cols` matrices, explicit on
/// `[k_min, k_max]` and described by a [`SeqTail`] beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeq {
    rows: usize,
    cols: usize,
    k_min: i64,
    head: Vec<DMatrix<f64>>,
    tail: SeqTail,
    deficit: f64,
    // over[i] = M̄(k_min − 1 + i), double_e[i] = M̿(k_min − 1 + i) e.
    over: Vec<DMatrix<f64>>,
    double_e: Vec<Option<DVector<f64>>>,
}

impl MatrixSeq {
    fn build(rows: usize, cols: usize, k_min: i64, head: Vec<DMatrix<f64>>, tail: SeqTail) -> Result<Self, SeqError> {
        for (i, m) in head.iter().enumerate() {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(SeqError::DimensionMismatch(format!(
                    "level {} is {}×{}, expected {rows}×{cols}",
                    k_min + i as i64,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if let Some(v) = m.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(SeqError::InvalidEntry { level: k_min + i as i64, value: *v });
            }
        }
        let (beyond, beyond_double) = match &tail {
            SeqTail::None => (DMatrix::zeros(rows, cols), Some(DVector::zeros(rows))),
            SeqTail::RankOne { v, w, dist } => {
                if v.len() != rows || w.len() != cols {
                    return Err(SeqError::DimensionMismatch("rank-one tail factors".into()));
                }
                if v.iter().chain(w.iter()).any(|x| !(*x >= 0.0)) {
                    return Err(SeqError::InvalidEntry { level: k_min + head.len() as i64, value: -1.0 });
                }
                dist.validate()?;
                let k_max = k_min + head.len() as i64 - 1;
                let vw = v * w.transpose();
                let first = dist.integrated_tail(k_max, 1).ok().filter(|x| x.is_finite());
                let we = w.sum();
                (vw * dist.tail(k_max), first.map(|s| v * (we * s)))
            }
            SeqTail::Aggregate { mass, excess } => {
                if mass.nrows() != rows || mass.ncols() != cols {
                    return Err(SeqError::DimensionMismatch("aggregate tail mass".into()));
                }
                let dbl = excess.as_ref().map(|x| {
                    let mut d = x - mass * ones(cols);
                    d.iter_mut().for_each(|v| *v = v.max(0.0));
                    d
                });
                (mass.clone(), dbl)
            }
        };
        let n = head.len();
        let mut over = vec![DMatrix::zeros(rows, cols); n + 1];
        let mut double_e = vec![None; n + 1];
        over[n] = beyond;
        double_e[n] = beyond_double;
        for i in (0..n).rev() {
            over[i] = &over[i + 1] + &head[i];
            double_e[i] = double_e[i + 1].as_ref().map(|d| d + &over[i + 1] * ones(cols));
        }
        Ok(MatrixSeq { rows, cols, k_min, head, tail, deficit: 0.0, over, double_e })
    }

    /// Finitely supported sequence on `k_min..k_min + head.len()`.
    pub fn finite(k_min: i64, head: Vec<DMatrix<f64>>) -> Result<Self, SeqError> {
        let (r, c) = head.first().map(|m| m.shape()).ok_or_else(|| SeqError::DimensionMismatch("empty head".into()))?;
        Self::build(r, c, k_min, head, SeqTail::None)
    }

    /// Sequence with `M(k) = v wᵀ P(T = k)` beyond the head.
    pub fn with_rank_one_tail(
        k_min: i64,
        head: Vec<DMatrix<f64>>,
        v: DVector<f64>,
        w: DVector<f64>,
        dist: DiscreteDist,
    ) -> Result<Self, SeqError> {
        let (r, c) = (v.len(), w.len());
        Self::build(r, c, k_min, head, SeqTail::RankOne { v, w, dist })
    }

    /// Sequence whose tail is known only through its total and first moment.
    pub fn with_aggregate_tail(
        k_min: i64,
        head: Vec<DMatrix<f64>>,
        mass: DMatrix<f64>,
        excess: Option<DVector<f64>>,
    ) -> Result<Self, SeqError> {
        let (r, c) = mass.shape();
        Self::build(r, c, k_min, head, SeqTail::Aggregate { mass, excess })
    }

    /// Zero sequence of the given shape, stored at level `k_min`.
    pub fn zero(rows: usize, cols: usize, k_min: i64) -> Self {
        Self::build(rows, cols, k_min, vec![DMatrix::zeros(rows, cols)], SeqTail::None).expect("zero sequence is valid")
    }

    /// Scalar sequence from values starting at `k_min`.
    pub fn scalar(k_min: i64, values: &[f64]) -> Result<Self, SeqError> {
        Self::finite(k_min, values.iter().map(|v| DMatrix::from_element(1, 1, *v)).collect())
    }

    /// Records mass lost by an upstream truncation.
    pub fn with_deficit(mut self, deficit: f64) -> Self {
        self.deficit = deficit;
        self
    }

    /// Row dimension.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Column dimension.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// First stored level.
    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    /// Last stored level.
    pub fn k_max(&self) -> i64 {
        self.k_min + self.head.len() as i64 - 1
    }

    /// Explicit blocks on `k_min..=k_max`.
    pub fn head(&self) -> &[DMatrix<f64>] {
        &self.head
    }

    /// Tail descriptor.
    pub fn tail(&self) -> &SeqTail {
        &self.tail
    }

    /// Mass dropped by truncation upstream (not represented anywhere).
    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    /// True when the sequence has no tail beyond the head.
    pub fn is_finite_support(&self) -> bool {
        matches!(self.tail, SeqTail::None)
    }

    /// Last level that can be evaluated individually.
    pub fn horizon(&self) -> i64 {
        match self.tail {
            SeqTail::Aggregate { .. } => self.k_max(),
            _ => i64::MAX,
        }
    }

    /// Borrow of a stored block.
    pub fn head_at(&self, k: i64) -> Option<&DMatrix<f64>> {
        if k < self.k_min {
            return None;
        }
        self.head.get((k - self.k_min) as usize)
    }

    /// `M(k)`.
    pub fn at(&self, k: i64) -> Result<DMatrix<f64>, SeqError> {
        if let Some(m) = self.head_at(k) {
            return Ok(m.clone());
        }
        if k < self.k_min {
            return Ok(DMatrix::zeros(self.rows, self.cols));
        }
        match &self.tail {
            SeqTail::None => Ok(DMatrix::zeros(self.rows, self.cols)),
            SeqTail::RankOne { v, w, dist } => Ok(v * w.transpose() * dist.pmf(k)),
            SeqTail::Aggregate { .. } => Err(SeqError::BeyondHorizon { k, k_max: self.k_max() }),
        }
    }

    /// `Σ_k M(k)`.
    pub fn total(&self) -> &DMatrix<f64> {
        &self.over[0]
    }

    /// `M̄(k) = Σ_{l>k} M(l)`.
    pub fn overline(&self, k: i64) -> Result<DMatrix<f64>, SeqError> {
        if k < self.k_min {
            return Ok(self.over[0].clone());
        }
        let i = (k - self.k_min + 1) as usize;
        if i < self.over.len() {
            return Ok(self.over[i].clone());
        }
        match &self.tail {
            SeqTail::None => Ok(DMatrix::zeros(self.rows, self.cols)),
            SeqTail::RankOne { v, w, dist } => Ok(v * w.transpose() * dist.tail(k)),
            SeqTail::Aggregate { .. } => Err(SeqError::BeyondHorizon { k, k_max: self.k_max() }),
        }
    }

    /// `M̄(k) e`.
    pub fn overline_e(&self, k: i64) -> Result<DVector<f64>, SeqError> {
        if k < self.k_min {
            return Ok(&self.over[0] * ones(self.cols));
        }
        let i = (k - self.k_min + 1) as usize;
        if i < self.over.len() {
            return Ok(&self.over[i] * ones(self.cols));
        }
        match &self.tail {
            SeqTail::RankOne { v, w, dist } => Ok(v * (w.sum() * dist.tail(k))),
            _ => Ok(self.overline(k)? * ones(self.cols)),
        }
    }

    /// `M̿(k) e = Σ_{l>k} M̄(l) e`.
    pub fn double_overline_e(&self, k: i64) -> Result<DVector<f64>, SeqError> {
        let missing = || SeqError::NotSummable("double tail needs a finite first moment".into());
        if k < self.k_min - 1 {
            let base = self.double_e[0].clone().ok_or_else(missing)?;
            let steps = (self.k_min - 1 - k) as f64;
            return Ok(base + &self.over[0] * ones(self.cols) * steps);
        }
        let i = (k - self.k_min + 1) as usize;
        if i < self.double_e.len() {
            return self.double_e[i].clone().ok_or_else(missing);
        }
        match &self.tail {
            SeqTail::None => Ok(DVector::zeros(self.rows)),
            SeqTail::RankOne { v, w, dist } => {
                let s = dist.integrated_tail(k, 1)?;
                if !s.is_finite() {
                    return Err(missing());
                }
                Ok(v * (w.sum() * s))
            }
            SeqTail::Aggregate { .. } => Err(SeqError::BeyondHorizon { k, k_max: self.k_max() }),
        }
    }

    /// Full matrix double tail `M̿(k)`; unavailable for aggregate tails.
    pub fn double_overline(&self, k: i64) -> Result<DMatrix<f64>, SeqError> {
        let beyond = match &self.tail {
            SeqTail::None => DMatrix::zeros(self.rows, self.cols),
            SeqTail::RankOne { v, w, dist } => {
                let s = dist.integrated_tail(self.k_max().max(k), 1)?;
                if !s.is_finite() {
                    return Err(SeqError::NotSummable("double tail needs a finite first moment".into()));
                }
                v * w.transpose() * s
            }
            SeqTail::Aggregate { .. } => {
                return Err(SeqError::MissingParametricTail("matrix double tail of an aggregate".into()))
            }
        };
        let mut acc = beyond;
        let mut l = self.k_max();
        while l > k {
            acc += self.overline(l)?;
            l -= 1;
        }
        Ok(acc)
    }

    /// `Σ_k k M(k) e`.
    pub fn first_moment_e(&self) -> Result<DVector<f64>, SeqError> {
        let d = self.double_overline_e(self.k_min - 1)?;
        Ok(d + &self.over[0] * ones(self.cols) * self.k_min as f64)
    }

    /// `Σ_k k M(k)` as a matrix; unavailable for aggregate tails.
    pub fn first_moment(&self) -> Result<DMatrix<f64>, SeqError> {
        let mut acc = DMatrix::zeros(self.rows, self.cols);
        for (i, m) in self.head.iter().enumerate() {
            acc += m * (self.k_min + i as i64) as f64;
        }
        match &self.tail {
            SeqTail::None => {}
            SeqTail::RankOne { v, w, dist } => {
                let k = self.k_max();
                // Σ_{j>k} j P(T = j) = k P(T > k) + Σ_{l>k} P(T > l).
                let s = k as f64 * dist.tail(k) + dist.integrated_tail(k, 1)?;
                if !s.is_finite() {
                    return Err(SeqError::NotSummable("first moment".into()));
                }
                acc += v * w.transpose() * s;
            }
            SeqTail::Aggregate { .. } => {
                return Err(SeqError::MissingParametricTail("matrix first moment of an aggregate".into()))
            }
        }
        Ok(acc)
    }

    /// A copy of the head truncated (or extended through the tail) to end at
    /// `k_max`, with the remaining tail summarized as an aggregate.
    pub fn rehead(&self, k_max: i64) -> Result<MatrixSeq, SeqError> {
        if k_max < self.k_min {
            return Err(SeqError::DimensionMismatch(format!("k_max {k_max} below k_min {}", self.k_min)));
        }
        let head: Result<Vec<_>, _> = (self.k_min..=k_max).map(|k| self.at(k)).collect();
        let mass = self.overline(k_max)?;
        let excess = self.double_overline_e(k_max).ok().map(|d| d + &mass * ones(self.cols));
        Ok(MatrixSeq::with_aggregate_tail(self.k_min, head?, mass, excess)?.with_deficit(self.deficit))
    }
}

/// `(a ∗ b)(k) = Σ_l a(k − l) b(l)`.
///
/// Levels up to `a.k_max + b.k_max` are evaluated explicitly, reconstructing
/// rank-one tails where needed; the rest is kept as an aggregate whose mass
/// is the exact product of totals minus the explicit part.
pub fn convolve(a: &MatrixSeq, b: &MatrixSeq) -> Result<MatrixSeq, SeqError> {
    if a.cols != b.rows {
        return Err(SeqError::DimensionMismatch(format!("{}×{} times {}×{}", a.rows, a.cols, b.rows, b.cols)));
    }
    let lo = a.k_min + b.k_min;
    let mut hi = a.k_max() + b.k_max();
    hi = hi.min(a.horizon().saturating_add(b.k_min)).min(b.horizon().saturating_add(a.k_min));
    let mut head = Vec::with_capacity((hi - lo + 1) as usize);
    for k in lo..=hi {
        let mut acc = DMatrix::zeros(a.rows, b.cols);
        for j in a.k_min..=(k - b.k_min) {
            let left = a.at(j)?;
            let right = b.at(k - j)?;
            acc.gemm(1.0, &left, &right, 1.0);
        }
        head.push(acc);
    }
    let deficit = a.deficit + b.deficit;
    if a.is_finite_support() && b.is_finite_support() {
        return Ok(MatrixSeq::finite(lo, head)?.with_deficit(deficit));
    }
    let total = a.total() * b.total();
    let explicit: DMatrix<f64> = head.iter().fold(DMatrix::zeros(a.rows, b.cols), |s, m| s + m);
    let mut mass = total - explicit;
    mass.iter_mut().for_each(|v| *v = v.max(0.0));
    let excess = match (a.first_moment(), b.first_moment()) {
        (Ok(ma), Ok(mb)) => {
            let m1 = (ma * b.total() + a.total() * mb) * ones(b.cols);
            let mut head_m1 = DVector::zeros(a.rows);
            for (i, m) in head.iter().enumerate() {
                head_m1 += m * ones(b.cols) * (lo + i as i64) as f64;
            }
            let ex = m1 - head_m1 - &mass * ones(b.cols) * hi as f64;
            Some(ex.map(|v| v.max(0.0)))
        }
        _ => None,
    };
    Ok(MatrixSeq::with_aggregate_tail(lo, head, mass, excess)?.with_deficit(deficit))
}

/// Renewal sum `F = Σ_{n≥0} R^{∗n}`, i.e. the solution of `F = δ₀ I + R ∗ F`.
///
/// Levels are generated until the explicit part of `Σ_k F(k)` is within
/// `tol` of `(I − Σ_k R(k))^{−1}` in the ∞-norm, or `max_levels` is reached;
/// the remainder is attached as an exact aggregate.
pub fn nfold_geometric_sum(r: &MatrixSeq, tol: f64, max_levels: usize) -> Result<MatrixSeq, SeqError> {
    if r.rows != r.cols {
        return Err(SeqError::DimensionMismatch("renewal sum needs square blocks".into()));
    }
    if r.k_min < 0 {
        return Err(SeqError::DimensionMismatch("renewal sum needs levels k ≥ 0".into()));
    }
    let n = r.rows;
    let rho = spectral_radius_nonneg(r.total());
    if rho >= 1.0 - 1e-12 {
        return Err(SeqError::Unstable(rho));
    }
    let limit = inv_i_minus(r.total()).ok_or(SeqError::Unstable(rho))?;
    let r0 = r.at(0)?;
    let lead = inv_i_minus(&r0).ok_or(SeqError::Unstable(rho))?;
    let mut rs: Vec<DMatrix<f64>> = vec![r0];
    let mut f: Vec<DMatrix<f64>> = vec![lead.clone()];
    let mut sum = lead.clone();
    let horizon = r.horizon();
    let mut k = 0i64;
    while inf_norm(&(&limit - &sum)) > tol && (k as usize) < max_levels && k < horizon {
        k += 1;
        rs.push(r.at(k)?);
        let mut acc = DMatrix::zeros(n, n);
        // F(k) = (I − R(0))^{−1} Σ_{l=1}^{k} R(l) F(k − l)
        for l in 1..=k as usize {
            acc.gemm(1.0, &rs[l], &f[k as usize - l], 1.0);
        }
        let fk = &lead * acc;
        sum += &fk;
        f.push(fk);
    }
    let mut mass = &limit - &sum;
    mass.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(MatrixSeq::with_aggregate_tail(0, f, mass, None)?.with_deficit(r.deficit))
}

/// Sampled distance of the convolution tail from its subexponential limit.
#[derive(Debug, Clone)]
pub struct TailLimitReport {
    /// `M̃ N + M Ñ`.
    pub limit: DMatrix<f64>,
    /// `(k, ‖(M∗N)‾(k)/P(Y>k) − limit‖_∞)`.
    pub errors: Vec<(i64, f64)>,
    /// Error relative to `‖limit‖_∞` at the last window point (absolute if the limit is zero).
    pub final_relative_error: f64,
    /// True when the error shrinks along the window.
    pub decreasing: bool,
}

fn tail_coefficient(s: &MatrixSeq, y: &DiscreteDist) -> Result<DMatrix<f64>, SeqError> {
    match &s.tail {
        SeqTail::None => Ok(DMatrix::zeros(s.rows, s.cols)),
        SeqTail::RankOne { v, w, dist } => {
            let ratio = if dist == y {
                1.0
            } else {
                let far = 1_000_000_000_000i64;
                dist.tail(far) / y.tail(far)
            };
            Ok(v * w.transpose() * ratio)
        }
        SeqTail::Aggregate { .. } => Err(SeqError::MissingParametricTail("convolution tail check".into())),
    }
}

/// `(m ∗ n)‾(k) = Σ_{j ≤ k − n.k_min} m(j) n̄(k − j) + m̄(k − n.k_min) Σ n`.
pub fn convolution_overline(m: &MatrixSeq, n: &MatrixSeq, k: i64) -> Result<DMatrix<f64>, SeqError> {
    if m.cols != n.rows {
        return Err(SeqError::DimensionMismatch("convolution tail".into()));
    }
    let mut acc = m.overline(k - n.k_min)? * n.total();
    for j in m.k_min..=(k - n.k_min) {
        let left = m.at(j)?;
        let right = n.overline(k - j)?;
        acc.gemm(1.0, &left, &right, 1.0);
    }
    Ok(acc)
}

/// Checks `(M∗N)‾(k)/P(Y>k) → M̃ N + M Ñ` along `window`, where
/// `M̃ = lim M̄(k)/P(Y>k)` is read off the rank-one descriptors.
pub fn convolution_tail_limit_check(
    m: &MatrixSeq,
    n: &MatrixSeq,
    y: &DiscreteDist,
    window: &[i64],
) -> Result<TailLimitReport, SeqError> {
    let mt = tail_coefficient(m, y)?;
    let nt = tail_coefficient(n, y)?;
    let limit = &mt * n.total() + m.total() * &nt;
    let mut errors = Vec::with_capacity(window.len());
    for &k in window {
        let ov = convolution_overline(m, n, k)?;
        let scaled = ov / y.tail(k);
        errors.push((k, inf_norm(&(scaled - &limit))));
    }
    let scale = inf_norm(&limit);
    let last = errors.last().map(|e| e.1).unwrap_or(f64::NAN);
    let final_relative_error = if scale > 0.0 { last / scale } else { last };
    let decreasing = errors.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12) + 1e-300);
    Ok(TailLimitReport { limit, errors, final_relative_error, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn unit_mass_has_zero_tail() {
        let s = MatrixSeq::scalar(0, &[1.0]).unwrap();
        for k in 0..5 {
            assert_eq!(s.overline(k).unwrap()[(0, 0)], 0.0);
        }
        assert_eq!(s.overline(-1).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn geometric_tails() {
        let g = DiscreteDist::geometric(0.5).unwrap();
        let s = MatrixSeq::with_rank_one_tail(
            0,
            vec![m1(0.5)],
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
            g,
        )
        .unwrap();
        for k in 0..30 {
            let ov = s.overline(k).unwrap()[(0, 0)];
            let dov = s.double_overline_e(k).unwrap()[0];
            assert!((ov - 0.5f64.powi(k as i32 + 1)).abs() < 1e-16);
            assert!((dov - 2.0 * 0.5f64.powi(k as i32 + 2)).abs() < 1e-15, "k = {k}: {dov}");
        }
    }

    #[test]
    fn scalar_convolution() {
        let a = MatrixSeq::scalar(0, &[0.5, 0.5]).unwrap();
        let c = convolve(&a, &a).unwrap();
        let vals: Vec<f64> = c.head().iter().map(|m| m[(0, 0)]).collect();
        assert_eq!(vals, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn geometric_sum_of_shift() {
        let r = MatrixSeq::scalar(1, &[0.5]).unwrap();
        let f = nfold_geometric_sum(&r, 1e-13, 1000).unwrap();
        for k in 0..20 {
            assert!((f.at(k).unwrap()[(0, 0)] - 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
        assert!((f.total()[(0, 0)] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn geometric_sum_rejects_unstable() {
        let r = MatrixSeq::scalar(1, &[1.0]).unwrap();
        assert!(matches!(nfold_geometric_sum(&r, 1e-10, 100), Err(SeqError::Unstable(_))));
    }

    #[test]
    fn aggregate_double_tail_matches_explicit() {
        let vals = [0.1, 0.2, 0.3, 0.25, 0.15];
        let full = MatrixSeq::scalar(0, &vals).unwrap();
        let cut = full.rehead(1).unwrap();
        for k in -3..6 {
            let a = full.double_overline_e(k).unwrap()[0];
            let b = cut.double_overline_e(k.min(1)).unwrap()[0];
            if k <= 1 {
                assert!((a - b).abs() < 1e-15, "k = {k}");
            }
        }
        assert!((full.first_moment_e().unwrap()[0] - cut.first_moment_e().unwrap()[0]).abs() < 1e-15);
    }
}
