//! Continuous service-time laws, their equilibrium transforms and
//! Poisson-mixture (uniformization) weights.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::DistError;
use crate::numeric::poisson;
use crate::numeric::quad::{integrate, integrate_to_infinity, DEFAULT_REL_TOL};

/// Hard cap on the number of Poisson-mixture terms.
pub const MAX_MIXTURE_TERMS: usize = 1_000_000;

/// A nonnegative continuous service-time law with finite positive mean and
/// no atom at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ServiceDist {
    /// `H̄(x) = e^{−rate·x}`.
    Exponential {
        /// Service rate μ.
        rate: f64,
    },
    /// Sum of `shape` exponential phases, each with rate `rate`.
    Erlang {
        /// Number of phases.
        shape: u32,
        /// Rate of every phase.
        rate: f64,
    },
    /// Constant service time.
    Deterministic {
        /// Service duration.
        value: f64,
    },
    /// `H̄(x) = (1 + x/scale)^{−α}`.
    Pareto {
        /// Tail index; must exceed 1 for a finite mean.
        alpha: f64,
        /// Scale parameter.
        scale: f64,
    },
}

/// Tail accessor of the equilibrium law `Hₑ(x) = h^{−1}∫₀ˣ H̄(y)dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumTail {
    base: ServiceDist,
}

impl EquilibriumTail {
    /// `H̄ₑ(x)`.
    pub fn tail(&self, x: f64) -> f64 {
        self.base.eq_tail(x)
    }

    /// Density `H̄(x)/h`.
    pub fn density(&self, x: f64) -> f64 {
        self.base.tail(x) / self.base.mean()
    }

    /// The underlying service law.
    pub fn base(&self) -> &ServiceDist {
        &self.base
    }
}

/// Weights `γ_n = ∫ e^{−θx}(θx)^n/n! dF(x)` and exact tails `Σ_{m>n} γ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonMixture {
    /// Uniformization rate θ.
    pub theta: f64,
    /// `γ_n` for `n = 0..=N`.
    pub weights: Vec<f64>,
    /// `γ̄_n = Σ_{m>n} γ_m` for `n = 0..=N`.
    pub tails: Vec<f64>,
}

impl PoissonMixture {
    /// Index of the last stored term.
    pub fn horizon(&self) -> usize {
        self.weights.len() - 1
    }

    /// Mass dropped beyond the horizon.
    pub fn residual(&self) -> f64 {
        *self.tails.last().unwrap_or(&0.0)
    }
}

fn neg_binomial_tail(shape: u32, p: f64, n: usize) -> f64 {
    // P(N > n) = P(fewer than `shape` successes in n + shape trials).
    let trials = n as f64 + shape as f64;
    let q = 1.0 - p;
    let mut total = 0.0;
    for j in 0..shape {
        let jf = j as f64;
        let ln_c = ln_gamma(trials + 1.0) - ln_gamma(jf + 1.0) - ln_gamma(trials - jf + 1.0);
        total += (ln_c + jf * p.ln() + (trials - jf) * q.ln()).exp();
    }
    total
}

/// Absolute error accepted on a single Poisson-kernel integral.
const KERNEL_ABS_FLOOR: f64 = 1e-26;

/// `∫₀^∞ P(Pois(θx) = n) g(x) dx` for a smooth nonnegative `g`.
pub(crate) fn poisson_kernel_integral<G: Fn(f64) -> f64>(
    n: usize,
    theta: f64,
    g: G,
    rel_tol: f64,
) -> Result<f64, DistError> {
    let nf = n as f64;
    let peak = if n == 0 { 0.0 } else { nf * nf.ln() - nf - ln_gamma(nf + 1.0) };
    let kernel = |t: f64| {
        if t <= 0.0 {
            return if n == 0 { g(0.0) } else { 0.0 };
        }
        let ln_p = if n == 0 {
            -t
        } else {
            let u = (t - nf) / nf;
            peak + nf * (u.ln_1p() - u)
        };
        if ln_p < -745.0 {
            0.0
        } else {
            ln_p.exp() * g(t / theta)
        }
    };
    let spread = 12.0 * (nf + 1.0).sqrt() + 20.0;
    let lo = (nf - spread).max(0.0);
    let hi = nf + spread;
    let mut main = 0.0;
    if nf > lo {
        main += integrate(kernel, lo, nf, rel_tol, KERNEL_ABS_FLOOR)?.value;
    }
    main += integrate(kernel, nf, hi, rel_tol, KERNEL_ABS_FLOOR)?.value;
    let floor = (main * rel_tol * 1e-3).max(KERNEL_ABS_FLOOR * 1e-3);
    let mut side = integrate_to_infinity(kernel, hi, rel_tol, floor)?.value;
    if lo > 0.0 {
        side += integrate(kernel, 0.0, lo, rel_tol, floor)?.value;
    }
    Ok((main + side) / theta)
}

impl ServiceDist {
    /// Pareto law with the given tail index and mean.
    pub fn pareto_with_mean(alpha: f64, mean: f64) -> Result<Self, DistError> {
        let d = ServiceDist::Pareto { alpha, scale: mean * (alpha - 1.0) };
        d.validate()?;
        Ok(d)
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<(), DistError> {
        let ok = match self {
            ServiceDist::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            ServiceDist::Erlang { shape, rate } => *shape >= 1 && *rate > 0.0 && rate.is_finite(),
            ServiceDist::Deterministic { value } => *value > 0.0 && value.is_finite(),
            ServiceDist::Pareto { alpha, scale } => {
                if !(*alpha > 1.0) {
                    return Err(DistError::InfiniteMean);
                }
                alpha.is_finite() && *scale > 0.0 && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(DistError::InvalidParameter(format!("{self:?}")))
        }
    }

    /// Mean service time `h`.
    pub fn mean(&self) -> f64 {
        match self {
            ServiceDist::Exponential { rate } => 1.0 / rate,
            ServiceDist::Erlang { shape, rate } => *shape as f64 / rate,
            ServiceDist::Deterministic { value } => *value,
            ServiceDist::Pareto { alpha, scale } => scale / (alpha - 1.0),
        }
    }

    /// `E[S²]`, or `None` when infinite.
    pub fn second_moment(&self) -> Option<f64> {
        match self {
            ServiceDist::Exponential { rate } => Some(2.0 / (rate * rate)),
            ServiceDist::Erlang { shape, rate } => {
                let r = *shape as f64;
                Some(r * (r + 1.0) / (rate * rate))
            }
            ServiceDist::Deterministic { value } => Some(value * value),
            ServiceDist::Pareto { alpha, scale } => {
                (*alpha > 2.0).then(|| 2.0 * scale * scale / ((alpha - 1.0) * (alpha - 2.0)))
            }
        }
    }

    /// Mean of the equilibrium law, `E[S²] / (2h)`.
    pub fn eq_mean(&self) -> Option<f64> {
        self.second_moment().map(|m2| m2 / (2.0 * self.mean()))
    }

    /// True for the kinds with exponentially decaying tails.
    pub fn is_light_tailed(&self) -> bool {
        !matches!(self, ServiceDist::Pareto { .. })
    }

    /// `H̄(x) = P(S > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            ServiceDist::Exponential { rate } => (-rate * x).exp(),
            ServiceDist::Erlang { shape, rate } => 1.0 - gamma_lr(*shape as f64, rate * x),
            ServiceDist::Deterministic { value } => {
                if x < *value {
                    1.0
                } else {
                    0.0
                }
            }
            ServiceDist::Pareto { alpha, scale } => (1.0 + x / scale).powf(-alpha),
        }
    }

    /// Density where it exists.
    pub fn density(&self, x: f64) -> Option<f64> {
        if x < 0.0 {
            return Some(0.0);
        }
        match self {
            ServiceDist::Exponential { rate } => Some(rate * (-rate * x).exp()),
            ServiceDist::Erlang { shape, rate } => {
                let r = *shape as f64;
                let ln = r * rate.ln() + (r - 1.0) * x.ln() - rate * x - ln_gamma(r);
                Some(if x == 0.0 && *shape > 1 { 0.0 } else { ln.exp() })
            }
            ServiceDist::Deterministic { .. } => None,
            ServiceDist::Pareto { alpha, scale } => Some(alpha / scale * (1.0 + x / scale).powf(-alpha - 1.0)),
        }
    }

    /// Equilibrium tail `H̄ₑ(x) = h^{−1}∫ₓ^∞ H̄(y)dy`, in closed form.
    pub fn eq_tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            ServiceDist::Exponential { rate } => (-rate * x).exp(),
            ServiceDist::Erlang { shape, rate } => {
                // Uniform mixture of Erlang(j, rate), j = 1..=shape.
                let r = *shape;
                (1..=r).map(|j| 1.0 - gamma_lr(j as f64, rate * x)).sum::<f64>() / r as f64
            }
            ServiceDist::Deterministic { value } => (1.0 - x / value).max(0.0),
            ServiceDist::Pareto { alpha, scale } => (1.0 + x / scale).powf(1.0 - alpha),
        }
    }

    /// Equilibrium tail by adaptive quadrature of `H̄`; an independent check
    /// of [`ServiceDist::eq_tail`].
    pub fn eq_tail_quadrature(&self, x: f64) -> Result<f64, DistError> {
        let x = x.max(0.0);
        let h = self.mean();
        let integral = match self {
            ServiceDist::Deterministic { value } => {
                if x >= *value {
                    0.0
                } else {
                    integrate(|y| self.tail(y), x, *value, DEFAULT_REL_TOL, 1e-300)?.value
                }
            }
            _ => integrate_to_infinity(|y| self.tail(y), x, 1e-11, 1e-300)?.value,
        };
        Ok(integral / h)
    }

    /// The equilibrium law as a tail accessor.
    pub fn equilibrium(&self) -> EquilibriumTail {
        EquilibriumTail { base: self.clone() }
    }

    /// `γ_n = P(Pois(θS) = n)`.
    pub fn mixture_weight(&self, n: usize, theta: f64) -> Result<f64, DistError> {
        let nf = n as f64;
        Ok(match self {
            ServiceDist::Exponential { rate } => {
                let p = rate / (rate + theta);
                p * (1.0 - p).powf(nf)
            }
            ServiceDist::Erlang { shape, rate } => {
                let r = *shape as f64;
                let p = rate / (rate + theta);
                let ln_c = ln_gamma(nf + r) - ln_gamma(nf + 1.0) - ln_gamma(r);
                (ln_c + r * p.ln() + nf * (1.0 - p).ln()).exp()
            }
            ServiceDist::Deterministic { value } => poisson::pmf(n, theta * value),
            ServiceDist::Pareto { alpha, scale } => {
                let (a, s) = (*alpha, *scale);
                poisson_kernel_integral(n, theta, |x| a / s * (1.0 + x / s).powf(-a - 1.0), 1e-11)?
            }
        })
    }

    /// `γ̄_n = P(Pois(θS) > n) = θ∫ P(Pois(θx) = n) H̄(x) dx`.
    pub fn mixture_tail(&self, n: usize, theta: f64) -> Result<f64, DistError> {
        Ok(match self {
            ServiceDist::Exponential { rate } => (theta / (rate + theta)).powf(n as f64 + 1.0),
            ServiceDist::Erlang { shape, rate } => neg_binomial_tail(*shape, rate / (rate + theta), n),
            ServiceDist::Deterministic { value } => gamma_lr(n as f64 + 1.0, theta * value),
            ServiceDist::Pareto { .. } => theta * poisson_kernel_integral(n, theta, |x| self.tail(x), 1e-11)?,
        })
    }

    /// `γ̄ᵉ_n = P(Pois(θSₑ) > n)` for the equilibrium variable `Sₑ`.
    pub fn eq_mixture_tail(&self, n: usize, theta: f64) -> Result<f64, DistError> {
        match self {
            ServiceDist::Exponential { .. } => self.mixture_tail(n, theta),
            ServiceDist::Erlang { shape, rate } => {
                let p = rate / (rate + theta);
                Ok((1..=*shape).map(|j| neg_binomial_tail(j, p, n)).sum::<f64>() / *shape as f64)
            }
            ServiceDist::Deterministic { value } => {
                // Σ_{m>n} γ̄_m / (θh), summed forward over a super-geometric tail.
                let mut acc = 0.0;
                let mut m = n + 1;
                loop {
                    let t = gamma_lr(m as f64 + 1.0, theta * value);
                    acc += t;
                    if t <= 1e-18 * acc || t == 0.0 || m > n + MAX_MIXTURE_TERMS {
                        break;
                    }
                    m += 1;
                }
                Ok(acc / (theta * value))
            }
            ServiceDist::Pareto { .. } => Ok(theta * poisson_kernel_integral(n, theta, |x| self.eq_tail(x), 1e-11)?),
        }
    }

    /// Weights and tails up to the first `n` with `γ̄_n < cutoff`.
    pub fn mixture(&self, theta: f64, cutoff: f64) -> Result<PoissonMixture, DistError> {
        if !(theta > 0.0) {
            return Err(DistError::InvalidParameter(format!("uniformization rate {theta}")));
        }
        if let ServiceDist::Deterministic { value } = self {
            let (weights, tails) = poisson::weights_and_tails(theta * value, cutoff);
            return Ok(PoissonMixture { theta, weights, tails });
        }
        let mut weights = Vec::new();
        let mut tails = Vec::new();
        let mut n = 0usize;
        loop {
            let w = self.mixture_weight(n, theta)?;
            let t = self.mixture_tail(n, theta)?;
            weights.push(w);
            tails.push(t);
            if t < cutoff {
                break;
            }
            n += 1;
            if n >= MAX_MIXTURE_TERMS {
                return Err(DistError::Unsupported(format!(
                    "Poisson mixture needs more than {MAX_MIXTURE_TERMS} terms to reach residual {cutoff:e}"
                )));
            }
        }
        Ok(PoissonMixture { theta, weights, tails })
    }

    /// Draws one service time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceDist::Exponential { rate } => -(1.0 - rng.gen::<f64>()).ln() / rate,
            ServiceDist::Erlang { shape, rate } => {
                (0..*shape).map(|_| -(1.0 - rng.gen::<f64>()).ln()).sum::<f64>() / rate
            }
            ServiceDist::Deterministic { value } => *value,
            ServiceDist::Pareto { alpha, scale } => {
                let u = 1.0 - rng.gen::<f64>();
                scale * (u.powf(-1.0 / alpha) - 1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pareto_equilibrium_closed_form_matches_quadrature() {
        let s = ServiceDist::pareto_with_mean(2.5, 1.0).unwrap();
        for &x in &[0.0, 0.3, 2.0, 50.0, 1e4] {
            let exact = s.eq_tail(x);
            let quad = s.eq_tail_quadrature(x).unwrap();
            assert!((exact - quad).abs() <= 1e-9 * exact, "x = {x}: {exact} vs {quad}");
        }
    }

    #[test]
    fn erlang_equilibrium_matches_quadrature() {
        let s = ServiceDist::Erlang { shape: 3, rate: 2.0 };
        for &x in &[0.1, 1.0, 4.0] {
            let exact = s.eq_tail(x);
            let quad = s.eq_tail_quadrature(x).unwrap();
            assert!((exact - quad).abs() <= 1e-9 * exact);
        }
    }

    #[test]
    fn mixture_tail_identity() {
        // γ̄_n = θ h γᵉ_n, with γᵉ_n = γ̄ᵉ_{n−1} − γ̄ᵉ_n.
        let theta = 0.7;
        for s in [
            ServiceDist::Exponential { rate: 1.3 },
            ServiceDist::Erlang { shape: 3, rate: 2.0 },
            ServiceDist::Deterministic { value: 1.5 },
            ServiceDist::pareto_with_mean(2.5, 1.0).unwrap(),
        ] {
            let h = s.mean();
            for n in 1..6 {
                let ge = s.eq_mixture_tail(n - 1, theta).unwrap() - s.eq_mixture_tail(n, theta).unwrap();
                let gbar = s.mixture_tail(n, theta).unwrap();
                assert!((gbar - theta * h * ge).abs() < 1e-9 * gbar.max(1e-3), "{s:?} n={n}");
            }
        }
    }

    #[test]
    fn mixture_weights_are_normalized() {
        for s in [
            ServiceDist::Exponential { rate: 1.0 },
            ServiceDist::Erlang { shape: 3, rate: 3.0 },
            ServiceDist::Deterministic { value: 2.0 },
        ] {
            let m = s.mixture(1.7, 1e-13).unwrap();
            let total: f64 = m.weights.iter().sum::<f64>() + m.residual();
            assert!((total - 1.0).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn pareto_weights_against_tail_differences() {
        let s = ServiceDist::pareto_with_mean(2.5, 1.0).unwrap();
        let theta = 0.4;
        let mut prev = 1.0;
        for n in 0..8 {
            let t = s.mixture_tail(n, theta).unwrap();
            let w = s.mixture_weight(n, theta).unwrap();
            assert!((prev - t - w).abs() < 1e-10, "n = {n}");
            prev = t;
        }
    }
}
