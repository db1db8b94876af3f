//! Numerical tail-ratio diagnostics for heavy-tail classes.
//!
//! These never prove membership; every report is flagged heuristic.

use serde::Serialize;

use super::{DiscreteDist, DistError};

/// Classes that can be probed numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailClass {
    /// Long-tailed: `P(Y > k + y)/P(Y > k) → 1`.
    LongTailed {
        /// Shift `y ≥ 1`.
        shift: i64,
    },
    /// Order-μ long-tailed: `P(Y > k − ξk^{1−1/μ})/P(Y > k) → 1`.
    LongTailedOrder {
        /// Order μ ≥ 1.
        mu: f64,
        /// Multiplier ξ > 0.
        xi: f64,
    },
    /// Consistent variation: `lim_{v↑1} limsup_k P(Y > vk)/P(Y > k) = 1`.
    ConsistentVariation,
}

/// Outcome of a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Ratios approach the class limit within tolerance.
    Consistent,
    /// Ratios stay away from the class limit.
    Fails,
}

/// Ratios sampled along a grid.
#[derive(Debug, Clone, Serialize)]
pub struct ClassDiagnostic {
    /// Probed class.
    pub class: TailClass,
    /// `(k, ratio)` pairs; for consistent variation, `k` is `v` scaled by 10⁶.
    pub ratios: Vec<(f64, f64)>,
    /// Ratio at the end of the grid (or at the `v` closest to 1).
    pub final_ratio: f64,
    /// True when `|ratio − 1|` shrinks over the second half of the grid.
    pub trending_to_one: bool,
    /// Pass/fail against the tolerance.
    pub verdict: Verdict,
    /// Always true.
    pub heuristic: bool,
}

/// Probes `d` for `class` on the integer points `grid`; the verdict compares
/// the final ratio with 1 at tolerance `tol`.
pub fn class_diagnostic(
    d: &DiscreteDist,
    class: TailClass,
    grid: &[i64],
    tol: f64,
) -> Result<ClassDiagnostic, DistError> {
    let pts: Vec<i64> = grid.iter().copied().filter(|k| *k >= 1 && d.tail(*k) > 0.0).collect();
    if pts.len() < 4 {
        return Err(DistError::GridTooShort(format!("{} points with positive tail", pts.len())));
    }
    let ratios: Vec<(f64, f64)> = match class {
        TailClass::LongTailed { shift } => pts.iter().map(|&k| (k as f64, d.tail(k + shift) / d.tail(k))).collect(),
        TailClass::LongTailedOrder { mu, xi } => pts
            .iter()
            .map(|&k| {
                let back = (xi * (k as f64).powf(1.0 - 1.0 / mu)).round() as i64;
                (k as f64, d.tail(k - back) / d.tail(k))
            })
            .collect(),
        TailClass::ConsistentVariation => {
            let upper = &pts[pts.len() / 2..];
            [0.5, 0.9, 0.99, 0.999]
                .iter()
                .map(|&v| {
                    let sup =
                        upper.iter().map(|&k| d.tail((v * k as f64).floor() as i64) / d.tail(k)).fold(0.0, f64::max);
                    (v * 1e6, sup)
                })
                .collect()
        }
    };
    let final_ratio = ratios.last().map(|r| r.1).unwrap_or(f64::NAN);
    let half = &ratios[ratios.len() / 2..];
    let trending_to_one = half.windows(2).all(|w| (w[1].1 - 1.0).abs() <= (w[0].1 - 1.0).abs() + 1e-15);
    let verdict = if (final_ratio - 1.0).abs() <= tol { Verdict::Consistent } else { Verdict::Fails };
    Ok(ClassDiagnostic { class, ratios, final_ratio, trending_to_one, verdict, heuristic: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(top: f64) -> Vec<i64> {
        (0..=50).map(|i| top.powf(i as f64 / 50.0).round() as i64).collect()
    }

    #[test]
    fn zeta_is_long_tailed() {
        let d = DiscreteDist::zeta_pareto(2.0).unwrap();
        let r = class_diagnostic(&d, TailClass::LongTailed { shift: 1 }, &log_grid(1e5), 1e-3).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert!(r.trending_to_one);
    }

    #[test]
    fn geometric_fails_long_tailed() {
        let d = DiscreteDist::geometric(0.5).unwrap();
        let r = class_diagnostic(&d, TailClass::LongTailed { shift: 1 }, &log_grid(200.0), 1e-3).unwrap();
        assert!((r.final_ratio - 0.5).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Fails);
    }

    #[test]
    fn zeta_is_consistently_varying() {
        let d = DiscreteDist::zeta_pareto(2.0).unwrap();
        let r = class_diagnostic(&d, TailClass::ConsistentVariation, &log_grid(1e5), 1e-2).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert!(r.ratios.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn short_grid_is_rejected() {
        let d = DiscreteDist::zeta_pareto(2.0).unwrap();
        assert!(class_diagnostic(&d, TailClass::LongTailed { shift: 1 }, &[1, 2], 1e-3).is_err());
    }
}
