//! Distributions on the nonnegative integers with exact tail access.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DistError;
use crate::numeric::zeta::hurwitz_zeta;

/// A distribution on {0, 1, 2, …} whose tails are available in closed form.
///
/// Parametric kinds never tabulate their tails, so `tail(k)` stays exact at
/// arbitrarily large `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiscreteDist {
    /// `P(Y = k) = p (1 − p)^k`.
    Geometric {
        /// Success probability in (0, 1].
        p: f64,
    },
    /// Point mass at `value`.
    Deterministic {
        /// Location of the atom.
        value: u64,
    },
    /// `P(Y > k) = (1 + k − shift)^{−α}` for `k ≥ shift`, and 1 below `shift`.
    ZetaPareto {
        /// Tail index α > 0.
        alpha: f64,
        /// Offset; the support is `{shift + 1, shift + 2, …}`.
        #[serde(default)]
        shift: u64,
    },
    /// Arbitrary finite support `{0, …, pmf.len() − 1}`.
    FiniteEmpirical {
        /// Probability masses; must sum to 1.
        pmf: Vec<f64>,
    },
    /// Even tails copied from `base`, odd tails averaged with the next point:
    /// `P(Y > 2n) = P(B > 2n)`, `P(Y > 2n+1) = (P(B > 2n) + P(B > 2n+1))/2`.
    Interleaved {
        /// The distribution being interleaved.
        base: Box<DiscreteDist>,
    },
    /// Discretized equilibrium law, `P(Y = k) = P(B > k)/E[B]`.
    Equilibrium {
        /// Distribution with finite positive mean.
        base: Box<DiscreteDist>,
    },
    /// Explicit head masses followed by a scaled copy of `base` beyond it.
    HeadTail {
        /// Masses at `0..head.len()`.
        head: Vec<f64>,
        /// Multiplier applied to `base.pmf(k)` for `k ≥ head.len()`.
        scale: f64,
        /// Law supplying the shape of the tail.
        base: Box<DiscreteDist>,
    },
}

fn finite_tail(pmf: &[f64], k: i64) -> f64 {
    if k < 0 {
        return 1.0;
    }
    let start = (k + 1) as usize;
    if start >= pmf.len() {
        return 0.0;
    }
    pmf[start..].iter().sum()
}

fn finite_order_sum(pmf: &[f64], k: i64, order: u32) -> f64 {
    // Σ_{l>k} of the (order−1)-fold integrated tail, by explicit finite sums.
    let top = pmf.len() as i64;
    if order == 0 {
        return finite_tail(pmf, k);
    }
    let mut total = 0.0;
    let mut l = k + 1;
    while l < top {
        total += finite_order_sum(pmf, l, order - 1);
        l += 1;
    }
    total
}

impl DiscreteDist {
    /// Geometric law with `P(Y = k) = p(1−p)^k`.
    pub fn geometric(p: f64) -> Result<Self, DistError> {
        let d = DiscreteDist::Geometric { p };
        d.validate()?;
        Ok(d)
    }

    /// Point mass at `value`.
    pub fn deterministic(value: u64) -> Self {
        DiscreteDist::Deterministic { value }
    }

    /// Zeta–Pareto law with `P(Y > k) = (1 + k)^{−α}`.
    pub fn zeta_pareto(alpha: f64) -> Result<Self, DistError> {
        Self::zeta_pareto_shifted(alpha, 0)
    }

    /// Zeta–Pareto law started at `shift`.
    pub fn zeta_pareto_shifted(alpha: f64, shift: u64) -> Result<Self, DistError> {
        let d = DiscreteDist::ZetaPareto { alpha, shift };
        d.validate()?;
        Ok(d)
    }

    /// Finite-support law; masses must be nonnegative and sum to 1.
    pub fn finite(pmf: Vec<f64>) -> Result<Self, DistError> {
        let d = DiscreteDist::FiniteEmpirical { pmf };
        d.validate()?;
        Ok(d)
    }

    /// Interleaving of `base` at odd points.
    pub fn interleaved(base: DiscreteDist) -> Self {
        DiscreteDist::Interleaved { base: Box::new(base) }
    }

    /// Explicit head with a scaled parametric tail from `base`.
    pub fn head_tail(head: Vec<f64>, scale: f64, base: DiscreteDist) -> Result<Self, DistError> {
        let d = DiscreteDist::HeadTail { head, scale, base: Box::new(base) };
        d.validate()?;
        Ok(d)
    }

    /// Checks parameter ranges and normalization.
    pub fn validate(&self) -> Result<(), DistError> {
        match self {
            DiscreteDist::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(DistError::InvalidParameter(format!("geometric p = {p} not in (0,1]")));
                }
            }
            DiscreteDist::Deterministic { .. } => {}
            DiscreteDist::ZetaPareto { alpha, .. } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(DistError::InvalidParameter(format!("zeta-pareto alpha = {alpha} must be positive")));
                }
            }
            DiscreteDist::FiniteEmpirical { pmf } => {
                if pmf.is_empty() || pmf.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(DistError::InvalidParameter("finite pmf must be nonempty and nonnegative".into()));
                }
                let s: f64 = pmf.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(DistError::NotNormalized(s));
                }
            }
            DiscreteDist::Interleaved { base } => base.validate()?,
            DiscreteDist::Equilibrium { base } => {
                base.validate()?;
                match base.mean() {
                    Some(m) if m > 0.0 => {}
                    Some(_) => return Err(DistError::ZeroMean),
                    None => return Err(DistError::InfiniteMean),
                }
            }
            DiscreteDist::HeadTail { head, scale, base } => {
                base.validate()?;
                if head.iter().any(|v| !(*v >= 0.0)) || !(*scale >= 0.0) {
                    return Err(DistError::InvalidParameter("head-tail masses must be nonnegative".into()));
                }
                let s: f64 = head.iter().sum::<f64>() + scale * base.tail(head.len() as i64 - 1);
                if (s - 1.0).abs() > 1e-12 {
                    return Err(DistError::NotNormalized(s));
                }
            }
        }
        Ok(())
    }

    /// `P(Y = k)`; zero for negative `k`.
    pub fn pmf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        match self {
            DiscreteDist::Geometric { p } => p * (1.0 - p).powi(k.min(i32::MAX as i64) as i32),
            DiscreteDist::Deterministic { value } => {
                if k as u64 == *value {
                    1.0
                } else {
                    0.0
                }
            }
            DiscreteDist::FiniteEmpirical { pmf } => pmf.get(k as usize).copied().unwrap_or(0.0),
            DiscreteDist::Equilibrium { base } => base.tail(k) / base.mean().unwrap_or(f64::INFINITY),
            DiscreteDist::HeadTail { head, scale, base } => {
                if (k as usize) < head.len() {
                    head[k as usize]
                } else {
                    scale * base.pmf(k)
                }
            }
            _ => self.tail(k - 1) - self.tail(k),
        }
    }

    /// `P(Y > k)`; equal to 1 for negative `k`.
    pub fn tail(&self, k: i64) -> f64 {
        if k < 0 {
            return 1.0;
        }
        match self {
            DiscreteDist::Geometric { p } => (1.0 - p).powf((k + 1) as f64),
            DiscreteDist::Deterministic { value } => {
                if (k as u64) < *value {
                    1.0
                } else {
                    0.0
                }
            }
            DiscreteDist::ZetaPareto { alpha, shift } => {
                let s = *shift as i64;
                if k < s {
                    1.0
                } else {
                    ((1 + k - s) as f64).powf(-alpha)
                }
            }
            DiscreteDist::FiniteEmpirical { pmf } => finite_tail(pmf, k),
            DiscreteDist::Interleaved { base } => {
                if k % 2 == 0 {
                    base.tail(k)
                } else {
                    0.5 * (base.tail(k - 1) + base.tail(k))
                }
            }
            DiscreteDist::Equilibrium { base } => match (base.integrated_tail(k, 1), base.mean()) {
                (Ok(s), Some(m)) => s / m,
                _ => f64::NAN,
            },
            DiscreteDist::HeadTail { head, scale, base } => {
                let n = head.len() as i64;
                if k >= n - 1 {
                    scale * base.tail(k)
                } else {
                    head[(k + 1) as usize..].iter().sum::<f64>() + scale * base.tail(n - 1)
                }
            }
        }
    }

    /// Mean, or `None` when it is infinite.
    pub fn mean(&self) -> Option<f64> {
        self.integrated_tail(-1, 1).ok().filter(|m| m.is_finite())
    }

    /// Second moment `E[Y²]`, or `None` when infinite.
    pub fn second_moment(&self) -> Option<f64> {
        // E[Y²] = Σ_{k≥0} (2k+1) P(Y>k) = 2 Σ_{j≥0} S₁(j) + E[Y], S₁(j) = Σ_{l>j} P(Y>l).
        let m = self.mean()?;
        let s2 = self.integrated_tail(-1, 2).ok().filter(|v| v.is_finite())?;
        Some(2.0 * s2 + m)
    }

    /// Mean, failing with [`DistError::InfiniteMean`] when it diverges.
    pub fn finite_mean(&self) -> Result<f64, DistError> {
        self.mean().ok_or(DistError::InfiniteMean)
    }

    /// Repeated tail sums: `order = 0` is `P(Y > k)`, `order = 1` is
    /// `Σ_{l>k} P(Y > l)`, `order = 2` is `Σ_{l>k} Σ_{m>l} P(Y > m)`.
    ///
    /// Diverging sums return `f64::INFINITY`; kinds without a closed form
    /// return [`DistError::Unsupported`].
    pub fn integrated_tail(&self, k: i64, order: u32) -> Result<f64, DistError> {
        if order == 0 {
            return Ok(self.tail(k));
        }
        if order > 2 {
            return Err(DistError::Unsupported(format!("integrated tail of order {order}")));
        }
        if k < -1 {
            // Fold back to k = −1 one step at a time.
            let here = self.integrated_tail(k + 1, order)?;
            let step = self.integrated_tail(k + 1, order - 1)?;
            return Ok(here + step);
        }
        match self {
            DiscreteDist::Geometric { p } => {
                let q = 1.0 - p;
                Ok(q.powf((k + 1 + order as i64) as f64) / p.powi(order as i32))
            }
            DiscreteDist::Deterministic { value } => {
                let mut pmf = vec![0.0; *value as usize + 1];
                pmf[*value as usize] = 1.0;
                Ok(finite_order_sum(&pmf, k, order))
            }
            DiscreteDist::FiniteEmpirical { pmf } => Ok(finite_order_sum(pmf, k, order)),
            DiscreteDist::ZetaPareto { alpha, shift } => Ok(zeta_integrated(*alpha, *shift as i64, k, order)),
            DiscreteDist::Equilibrium { base } => {
                let m = base.finite_mean()?;
                Ok(base.integrated_tail(k, order + 1)? / m)
            }
            DiscreteDist::HeadTail { head, scale, base } => {
                let n = head.len() as i64;
                let pivot = k.max(n - 2);
                let mut total = scale * base.integrated_tail(pivot, order)?;
                let mut l = k + 1;
                while l <= n - 2 {
                    total += self.integrated_tail(l, order - 1)?;
                    l += 1;
                }
                Ok(total)
            }
            DiscreteDist::Interleaved { base } => {
                if order != 1 {
                    return Err(DistError::Unsupported("second integrated tail of an interleaved law".into()));
                }
                // Σ_{l≥2N} P(Y>l) = 1.5 E_N + 0.5 O_N with E_N + O_N and E_N − O_N closed.
                let first = k + 1;
                let (n, lead) = if first % 2 == 0 { (first / 2, 0.0) } else { (first / 2 + 1, self.tail(first)) };
                let both = base.integrated_tail(2 * n - 1, 1)?;
                let diff = base.odd_pmf_sum(n)?;
                let even = 0.5 * (both + diff);
                let odd = 0.5 * (both - diff);
                Ok(lead + 1.5 * even + 0.5 * odd)
            }
        }
    }

    /// `Σ_{n≥N} P(Y > 2n + parity)`.
    pub fn parity_tail_sum(&self, from: i64, parity: i64) -> Result<f64, DistError> {
        let from = from.max(0);
        match self {
            DiscreteDist::Geometric { p } => {
                let q = 1.0 - p;
                Ok(q.powf((2 * from + parity + 1) as f64) / (1.0 - q * q))
            }
            DiscreteDist::Deterministic { .. } | DiscreteDist::FiniteEmpirical { .. } => {
                let mut total = 0.0;
                let mut n = from;
                loop {
                    let t = self.tail(2 * n + parity);
                    if t == 0.0 {
                        break;
                    }
                    total += t;
                    n += 1;
                }
                Ok(total)
            }
            DiscreteDist::ZetaPareto { alpha, shift } => {
                let s = *shift as i64;
                let n0 = ((s - parity).max(0) + 1) / 2;
                let start = from.max(n0);
                let ones = (n0 - from).max(0) as f64;
                let offset = (1 + parity - s) as f64 / 2.0;
                Ok(ones + 2f64.powf(-alpha) * hurwitz_zeta(*alpha, start as f64 + offset))
            }
            DiscreteDist::HeadTail { head, scale, base } => {
                let n = head.len() as i64;
                let mut total = 0.0;
                let mut m = from;
                while 2 * m + parity < n - 1 {
                    total += self.tail(2 * m + parity);
                    m += 1;
                }
                Ok(total + scale * base.parity_tail_sum(m, parity)?)
            }
            _ => Err(DistError::Unsupported("parity tail sums for this kind".into())),
        }
    }

    /// `Σ_{n≥N} P(Y = 2n + 1)`.
    pub fn odd_pmf_sum(&self, from: i64) -> Result<f64, DistError> {
        match self {
            DiscreteDist::Equilibrium { base } => Ok(base.parity_tail_sum(from, 1)? / base.finite_mean()?),
            _ => Ok(self.parity_tail_sum(from, 0)? - self.parity_tail_sum(from, 1)?),
        }
    }

    /// Rightmost support point when the support is finite.
    pub fn support_max(&self) -> Option<u64> {
        match self {
            DiscreteDist::Deterministic { value } => Some(*value),
            DiscreteDist::FiniteEmpirical { pmf } => Some(pmf.iter().rposition(|v| *v > 0.0).unwrap_or(0) as u64),
            _ => None,
        }
    }

    /// True for the parametric kinds known to be subexponential.
    pub fn is_subexponential_family(&self) -> bool {
        match self {
            DiscreteDist::ZetaPareto { .. } => true,
            DiscreteDist::Interleaved { base } | DiscreteDist::Equilibrium { base } => base.is_subexponential_family(),
            DiscreteDist::HeadTail { base, scale, .. } => *scale > 0.0 && base.is_subexponential_family(),
            _ => false,
        }
    }

    /// Smallest `k > after` with `P(Y > k) < level`.
    fn invert_tail(&self, after: i64, level: f64) -> i64 {
        let mut lo = after;
        let mut step = 1i64;
        let mut hi = after + step;
        while self.tail(hi) >= level {
            lo = hi;
            step = step.saturating_mul(2);
            hi = hi.saturating_add(step);
            if hi > i64::MAX / 4 {
                return hi;
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tail(mid) >= level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Draws one variate by tail inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen::<f64>();
        let level = 1.0 - u;
        if self.tail(-1) < level {
            return 0;
        }
        self.invert_tail(-1, level).max(0) as u64
    }

    /// Draws from the law conditioned on `Y > after`.
    pub fn sample_beyond<R: Rng + ?Sized>(&self, after: i64, rng: &mut R) -> u64 {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let level = u * self.tail(after);
        self.invert_tail(after, level) as u64
    }
}

fn zeta_integrated(alpha: f64, shift: i64, k: i64, order: u32) -> f64 {
    // Tails are 1 on [0, shift) and (1 + l − shift)^{−α} beyond.
    let j = k - shift;
    match order {
        1 => {
            if j >= -1 {
                hurwitz_zeta(alpha, (j + 2) as f64)
            } else {
                (-1 - j) as f64 + hurwitz_zeta(alpha, 1.0)
            }
        }
        2 => {
            if alpha <= 2.0 {
                return f64::INFINITY;
            }
            let at = |jj: i64| {
                hurwitz_zeta(alpha - 1.0, (jj + 3) as f64) - (jj + 2) as f64 * hurwitz_zeta(alpha, (jj + 3) as f64)
            };
            if j >= -1 {
                at(j)
            } else {
                let mut total = at(-1);
                let mut l = k + 1;
                while l - shift < 0 {
                    total += zeta_integrated(alpha, shift, l, 1);
                    l += 1;
                }
                total
            }
        }
        _ => f64::NAN,
    }
}

/// Discretized equilibrium law `P(Y_de = k) = P(Y > k)/E[Y]`.
///
/// Geometric laws map to themselves and finite laws stay finite; other kinds
/// are wrapped so that tails remain exact.
pub fn discretized_equilibrium(d: &DiscreteDist) -> Result<DiscreteDist, DistError> {
    let mean = d.mean().ok_or(DistError::InfiniteMean)?;
    if mean <= 0.0 {
        return Err(DistError::ZeroMean);
    }
    match d {
        DiscreteDist::Geometric { p } => Ok(DiscreteDist::Geometric { p: *p }),
        DiscreteDist::Deterministic { .. } | DiscreteDist::FiniteEmpirical { .. } => {
            let top = d.support_max().unwrap_or(0) as i64;
            let pmf: Vec<f64> = (0..top).map(|k| d.tail(k) / mean).collect();
            let s: f64 = pmf.iter().sum();
            Ok(DiscreteDist::FiniteEmpirical { pmf: pmf.into_iter().map(|v| v / s).collect() })
        }
        _ => Ok(DiscreteDist::Equilibrium { base: Box::new(d.clone()) }),
    }
}
