//! Subexponential tail asymptotics of the stationary distribution:
//! coefficients from parametric tails, the predicted asymptote, ratio
//! reports and the interleaved counter-example.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;
use thiserror::Error;

use crate::blockseq::{MatrixSeq, SeqError, SeqTail};
use crate::gig1core::{ChainError, FirstPassageBundle, Gig1Chain, StationarySolution, StructuralReport};
use crate::heavytail::{discretized_equilibrium, DiscreteDist, DistError, ServiceDist};

/// Failures of the asymptotic analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticError {
    /// Neither `A` nor `B` has a parametric tail, so both coefficients vanish.
    #[error("tail assumption unsatisfiable: {0}")]
    NoParametricTail(String),
    /// `A` and `B` tails are not proportional to the same reference law.
    #[error("A and B tails use different reference laws")]
    MismatchedTails,
    /// The drift is not negative.
    #[error("drift sigma = {0} is not negative")]
    NonNegativeDrift(f64),
    /// The requested window is outside the solved range.
    #[error("window [{lo}, {hi}] exceeds the solved range {levels}")]
    WindowBeyondSolution {
        /// Window start.
        lo: usize,
        /// Window end.
        hi: usize,
        /// Last solved level.
        levels: usize,
    },
    /// Invalid argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Distribution error.
    #[error(transparent)]
    Dist(#[from] DistError),
    /// Sequence error.
    #[error(transparent)]
    Seq(#[from] SeqError),
    /// Chain error.
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Reference law `Y` with `A̿(k)e / P(Y > k) → c_A` and `B̿(k)e / P(Y > k) → c_B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCoefficients {
    /// Reference law.
    pub y: DiscreteDist,
    /// Coefficient for the level-homogeneous blocks, length `M`.
    pub c_a: Vec<f64>,
    /// Coefficient for the level-0 blocks, length `M0`.
    pub c_b: Vec<f64>,
}

impl TailCoefficients {
    /// `c_A` as a column vector.
    pub fn c_a_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.c_a)
    }

    /// `c_B` as a column vector.
    pub fn c_b_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.c_b)
    }
}

/// Tail function the asymptote is proportional to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ReferenceTail {
    /// `P(Y > k)` for a discrete law `Y`.
    Discrete(DiscreteDist),
    /// `H̄ₑ(k / rate)` for the equilibrium law of a service time.
    ScaledEquilibrium {
        /// Service law `H`.
        service: ServiceDist,
        /// Time scale divisor, the arrival rate.
        rate: f64,
    },
}

impl ReferenceTail {
    /// Value at level `k`.
    pub fn tail(&self, k: i64) -> f64 {
        match self {
            ReferenceTail::Discrete(d) => d.tail(k),
            ReferenceTail::ScaledEquilibrium { service, rate } => service.eq_tail(k as f64 / rate),
        }
    }
}

/// Predicted asymptote `x̄(k) ≈ prefactor · reference(k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPrediction {
    /// Row vector proportional to `π`.
    pub prefactor: Vec<f64>,
    /// Reference tail.
    pub reference: ReferenceTail,
}

impl TailPrediction {
    /// Prefactor as a row vector.
    pub fn prefactor_row(&self) -> RowDVector<f64> {
        RowDVector::from_row_slice(&self.prefactor)
    }

    /// `‖prefactor‖₁`.
    pub fn scale(&self) -> f64 {
        self.prefactor.iter().sum()
    }

    /// Predicted `x̄(k) e`.
    pub fn predicted_tail(&self, k: i64) -> f64 {
        self.scale() * self.reference.tail(k)
    }
}

/// Reference law and scalar factor `s` such that `Σ_{l>k} P(T > l) ~ s P(Y > k)`.
fn reference_for(t: &DiscreteDist) -> Result<(DiscreteDist, f64), AsymptoticError> {
    if let DiscreteDist::ZetaPareto { alpha, shift } = t {
        if *alpha > 1.0 {
            let y = DiscreteDist::zeta_pareto_shifted(alpha - 1.0, *shift)?;
            return Ok((y, 1.0 / (alpha - 1.0)));
        }
    }
    let mean = t.finite_mean()?;
    Ok((discretized_equilibrium(t)?, mean))
}

fn rank_one_parts(s: &MatrixSeq) -> Option<(&DVector<f64>, &DVector<f64>, &DiscreteDist)> {
    match s.tail() {
        SeqTail::RankOne { v, w, dist } => Some((v, w, dist)),
        _ => None,
    }
}

/// Extracts `Y`, `c_A`, `c_B` from rank-one parametric tails.
///
/// A tail `M(k) = v wᵀ P(T = k)` has `M̿(k) e = v (wᵀe) Σ_{l>k} P(T > l)`; for
/// zeta-type `T` with index `α` the reference is the zeta law of index
/// `α − 1`, otherwise it is the discretized equilibrium law of `T`.
pub fn coefficients_from_parametric(c: &Gig1Chain) -> Result<TailCoefficients, AsymptoticError> {
    let a = rank_one_parts(c.a());
    let b = rank_one_parts(c.b_up());
    let dist = match (a, b) {
        (Some((_, _, da)), Some((_, _, db))) if da != db => return Err(AsymptoticError::MismatchedTails),
        (Some((_, _, d)), _) | (None, Some((_, _, d))) => d,
        (None, None) => {
            return Err(AsymptoticError::NoParametricTail(
                "neither A nor B carries a parametric tail, so c_A = c_B = 0".into(),
            ))
        }
    };
    if !dist.is_subexponential_family() {
        log::warn!("reference law is not a known subexponential family; the asymptote is not guaranteed");
    }
    let (y, factor) = reference_for(dist)?;
    let coeff = |part: Option<(&DVector<f64>, &DVector<f64>, &DiscreteDist)>, n: usize| -> Vec<f64> {
        match part {
            Some((v, w, _)) => v.iter().map(|vi| vi * w.sum() * factor).collect(),
            None => vec![0.0; n],
        }
    };
    let c_a = coeff(a, c.m());
    let c_b = coeff(b, c.m0());
    if c_a.iter().chain(&c_b).all(|v| *v == 0.0) {
        return Err(AsymptoticError::NoParametricTail("both coefficients vanish".into()));
    }
    Ok(TailCoefficients { y, c_a, c_b })
}

/// `(x(0) c_B + x̄(0) c_A) / (−σ) · π`.
pub fn predict_tail(
    sol: &StationarySolution,
    tc: &TailCoefficients,
    pi: &RowDVector<f64>,
    sigma: f64,
) -> Result<TailPrediction, AsymptoticError> {
    if !(sigma < 0.0) {
        return Err(AsymptoticError::NonNegativeDrift(sigma));
    }
    if tc.c_a.len() != pi.len() || tc.c_b.len() != sol.x0.len() {
        return Err(AsymptoticError::InvalidArgument("coefficient dimensions do not match the solution".into()));
    }
    let x_bar0 = sol.tail.first().ok_or_else(|| AsymptoticError::InvalidArgument("empty solution".into()))?;
    let weight = (&sol.x0 * tc.c_b_vec())[0] + (x_bar0 * tc.c_a_vec())[0];
    let prefactor = pi * (weight / -sigma);
    Ok(TailPrediction {
        prefactor: prefactor.iter().copied().collect(),
        reference: ReferenceTail::Discrete(tc.y.clone()),
    })
}

/// One row of a [`TailRatioReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRatioPoint {
    /// Level.
    pub k: usize,
    /// `x̄(k) e`.
    pub true_tail: f64,
    /// `‖prefactor‖₁ P(Y > k)`.
    pub predicted_tail: f64,
    /// `true_tail / predicted_tail`.
    pub ratio: f64,
    /// Largest relative deviation over phases of `x̄(k)_i` from `prefactor_i P(Y > k)`.
    pub phase_deviation: f64,
}

/// Ratio of the computed tail to the predicted asymptote over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRatioReport {
    /// Per-level values.
    pub points: Vec<TailRatioPoint>,
    /// Smallest ratio.
    pub min_ratio: f64,
    /// Largest ratio.
    pub max_ratio: f64,
    /// Ratio at the window end.
    pub final_ratio: f64,
    /// `|ratio − 1|` at the end of the window is below its value at the start.
    pub approaching_one: bool,
    /// The window start is still far from the asymptote (`|ratio − 1| > tol`).
    pub preasymptotic_start: bool,
    /// Every ratio lies in `[1 − tol, 1 + tol]`.
    pub pass: bool,
    /// Tolerance used.
    pub tol: f64,
}

/// Levels spaced geometrically over `[lo, hi]`, always including both ends.
pub fn log_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    if points < 2 || hi <= lo {
        return vec![lo, hi];
    }
    let (a, b) = ((lo.max(1)) as f64, hi as f64);
    let mut out: Vec<usize> =
        (0..points).map(|i| (a * (b / a).powf(i as f64 / (points - 1) as f64)).round() as usize).collect();
    out[0] = lo;
    out[points - 1] = hi;
    out.dedup();
    out
}

/// Ratio report of `sol` against `pred` at the given levels.
pub fn tail_ratio_report(
    sol: &StationarySolution,
    pred: &TailPrediction,
    levels: &[usize],
    tol: f64,
) -> Result<TailRatioReport, AsymptoticError> {
    let (lo, hi) = match (levels.first(), levels.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(AsymptoticError::InvalidArgument("empty window".into())),
    };
    if hi >= sol.tail.len() {
        return Err(AsymptoticError::WindowBeyondSolution { lo, hi, levels: sol.tail.len().saturating_sub(1) });
    }
    let scale = pred.scale();
    let mut points = Vec::with_capacity(levels.len());
    for &k in levels {
        let yk = pred.reference.tail(k as i64);
        let true_tail = sol.tail_mass(k);
        let predicted_tail = scale * yk;
        let phase_deviation = sol.tail[k]
            .iter()
            .zip(&pred.prefactor)
            .filter(|(_, p)| **p > 0.0)
            .map(|(x, p)| (x / (p * yk) - 1.0).abs())
            .fold(0.0, f64::max);
        points.push(TailRatioPoint {
            k,
            true_tail,
            predicted_tail,
            ratio: true_tail / predicted_tail,
            phase_deviation,
        });
    }
    Ok(summarize(points, tol))
}

fn summarize(points: Vec<TailRatioPoint>, tol: f64) -> TailRatioReport {
    let min_ratio = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = points.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
    let first = points.first().map_or(f64::NAN, |p| p.ratio);
    let final_ratio = points.last().map_or(f64::NAN, |p| p.ratio);
    TailRatioReport {
        approaching_one: (final_ratio - 1.0).abs() <= (first - 1.0).abs(),
        preasymptotic_start: (first - 1.0).abs() > tol,
        pass: points.iter().all(|p| (p.ratio - 1.0).abs() <= tol),
        points,
        min_ratio,
        max_ratio,
        final_ratio,
        tol,
    }
}

/// Ratio report from precomputed `(k, true tail, predicted tail)` triples.
pub fn ratio_report_from(values: &[(usize, f64, f64)], tol: f64) -> TailRatioReport {
    let points = values
        .iter()
        .map(|&(k, t, p)| TailRatioPoint {
            k,
            true_tail: t,
            predicted_tail: p,
            ratio: t / p,
            phase_deviation: f64::NAN,
        })
        .collect();
    summarize(points, tol)
}

/// The interleaved law: even tails of `base`, odd tails averaged with the
/// neighbouring even point.
pub fn interleaved_fixture(base: &DiscreteDist) -> Result<DiscreteDist, AsymptoticError> {
    base.finite_mean()?;
    Ok(DiscreteDist::interleaved(base.clone()))
}

/// Subsequence limits of `Ā(k)e / P(U > k)` when `A̿(k)e = c_A P(Y > k)` with
/// `Y` interleaved from `U_de`.
#[derive(Debug, Clone, Serialize)]
pub struct OscillationReport {
    /// `(2n, ratio)` on even levels.
    pub even: Vec<(usize, f64)>,
    /// `(2n + 1, ratio)` on odd levels.
    pub odd: Vec<(usize, f64)>,
    /// `3/2 · c_A / E[U]`.
    pub even_limit: f64,
    /// `1/2 · c_A / E[U]`.
    pub odd_limit: f64,
    /// Relative deviation of the last even ratio from its limit.
    pub even_error: f64,
    /// Relative deviation of the last odd ratio from its limit.
    pub odd_error: f64,
}

/// `Ā(k)e = A̿(k−1)e − A̿(k)e = c_A P(Y = k)` evaluated on levels `levels`
/// for a scalar coefficient `c_A`, divided by `P(U > k)`.
///
/// No nonnegative block sequence has this double tail (odd-to-even steps of
/// `Ā(k)e` increase), so the check runs on the sequence itself.
pub fn oscillation_check(u: &DiscreteDist, c_a: f64, levels: &[usize]) -> Result<OscillationReport, AsymptoticError> {
    let mean = u.finite_mean()?;
    let y = interleaved_fixture(&discretized_equilibrium(u)?)?;
    let (mut even, mut odd) = (Vec::new(), Vec::new());
    for &k in levels {
        for kk in [k - k % 2, k - k % 2 + 1] {
            let bar = c_a * (y.tail(kk as i64 - 1) - y.tail(kk as i64));
            let r = bar / u.tail(kk as i64);
            if kk % 2 == 0 {
                even.push((kk, r));
            } else {
                odd.push((kk, r));
            }
        }
    }
    let even_limit = 1.5 * c_a / mean;
    let odd_limit = 0.5 * c_a / mean;
    let rel = |v: &[(usize, f64)], lim: f64| v.last().map_or(f64::NAN, |p| (p.1 / lim - 1.0).abs());
    Ok(OscillationReport {
        even_error: rel(&even, even_limit),
        odd_error: rel(&odd, odd_limit),
        even,
        odd,
        even_limit,
        odd_limit,
    })
}

/// Relative deviation over `levels` of `Σ_{m≥1} Ā(k+m) L(m) / P(Y > k)` from
/// `c_A ψ`.
pub fn ladder_tail_check(
    c: &Gig1Chain,
    fp: &FirstPassageBundle,
    structural: &StructuralReport,
    tc: &TailCoefficients,
    levels: &[usize],
) -> Result<Vec<(usize, f64)>, AsymptoticError> {
    let psi = RowDVector::from_row_slice(&structural.psi);
    let target = tc.c_a_vec() * &psi;
    let scale = target.abs().max();
    let w = fp.l_levels();
    let mut out = Vec::with_capacity(levels.len());
    for &k in levels {
        let k = k as i64;
        let mut acc = c.a().double_overline(k + w as i64)? * &fp.l_limit;
        for (i, l) in fp.l.iter().enumerate() {
            acc.gemm(1.0, &c.a().overline(k + i as i64 + 1)?, l, 1.0);
        }
        let ratio: DMatrix<f64> = acc / tc.y.tail(k);
        let dev = (ratio - &target).abs().max() / scale;
        out.push((k as usize, dev));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gig1core::Method;

    #[test]
    fn scalar_prefactor_arithmetic() {
        let sol = StationarySolution {
            x0: RowDVector::from_element(1, 0.4),
            x: vec![RowDVector::from_element(1, 0.6)],
            tail: vec![RowDVector::from_element(1, 0.6), RowDVector::zeros(1)],
            deficit: 0.0,
            method: Method::MatrixAnalytic,
        };
        let tc = TailCoefficients { y: DiscreteDist::zeta_pareto(1.5).unwrap(), c_a: vec![1.0], c_b: vec![0.0] };
        let p = predict_tail(&sol, &tc, &RowDVector::from_element(1, 1.0), -0.3).unwrap();
        assert!((p.prefactor[0] - 2.0).abs() < 1e-15);
        assert!(matches!(
            predict_tail(&sol, &tc, &RowDVector::from_element(1, 1.0), 0.0),
            Err(AsymptoticError::NonNegativeDrift(_))
        ));
    }

    #[test]
    fn interleaved_tails() {
        let u = DiscreteDist::zeta_pareto(1.5).unwrap();
        let y = interleaved_fixture(&u).unwrap();
        for n in 0..50i64 {
            assert_eq!(y.tail(2 * n), u.tail(2 * n));
            assert!((y.tail(2 * n + 1) - 0.5 * (u.tail(2 * n) + u.tail(2 * n + 1))).abs() < 1e-16);
        }
        let k = 10_000;
        assert!((y.tail(k + 1) / u.tail(k + 1) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn log_grid_covers_ends() {
        let g = log_grid(500, 5000, 12);
        assert_eq!(g.first(), Some(&500));
        assert_eq!(g.last(), Some(&5000));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn finite_chain_has_no_coefficients() {
        let a = MatrixSeq::scalar(-1, &[0.5, 0.2, 0.3]).unwrap();
        let b_up = MatrixSeq::scalar(1, &[0.3]).unwrap();
        let c =
            Gig1Chain::new(DMatrix::from_element(1, 1, 0.7), b_up, vec![DMatrix::from_element(1, 1, 0.5)], a).unwrap();
        assert!(matches!(coefficients_from_parametric(&c), Err(AsymptoticError::NoParametricTail(_))));
    }

    #[test]
    fn rank_one_a_tail_coefficients() {
        let t = DiscreteDist::zeta_pareto_shifted(2.5, 2).unwrap();
        let v = DVector::from_vec(vec![0.2, 0.1]);
        let w = DVector::from_vec(vec![0.25, 0.75]);
        let head = vec![DMatrix::from_element(2, 2, 0.1); 3];
        let a = MatrixSeq::with_rank_one_tail(-1, head, v.clone(), w.clone(), t).unwrap();
        let b_up = MatrixSeq::finite(1, vec![DMatrix::from_element(2, 2, 0.1)]).unwrap();
        let c = Gig1Chain::new(DMatrix::identity(2, 2), b_up, vec![DMatrix::identity(2, 2)], a.clone()).unwrap();
        let tc = coefficients_from_parametric(&c).unwrap();
        assert_eq!(tc.c_b, vec![0.0, 0.0]);
        for k in [10_000i64, 100_000] {
            let ratio = a.double_overline_e(k).unwrap() / tc.y.tail(k);
            for i in 0..2 {
                assert!((ratio[i] / tc.c_a[i] - 1.0).abs() < 20.0 / k as f64, "k={k} phase {i}");
            }
        }
        assert!((tc.c_a[0] - 0.2 / 1.5).abs() < 1e-15);
    }
}
