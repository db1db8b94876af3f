//! Cumulative hazard shapes used as hypotheses for the subexponential
//! concave class.

use serde::{Deserialize, Serialize};

use super::DistError;

/// A cumulative hazard `Q` with `P(U > x) ≈ e^{−Q(x)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum HazardSpec {
    /// `Q(x) = c·x^α` with `c > 0` and `0 < α < 1` (Weibull-like).
    Power {
        /// Coefficient `c`.
        c: f64,
        /// Exponent `α`.
        alpha: f64,
    },
    /// `Q(x) = (ln x)^β` with `β > 1` (lognormal-like).
    LogPower {
        /// Exponent `β`.
        beta: f64,
    },
}

impl HazardSpec {
    /// Validated power form.
    pub fn power(c: f64, alpha: f64) -> Result<Self, DistError> {
        if !(c > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
            return Err(DistError::InvalidParameter(format!("power hazard c = {c}, alpha = {alpha}")));
        }
        Ok(HazardSpec::Power { c, alpha })
    }

    /// Validated log-power form.
    pub fn log_power(beta: f64) -> Result<Self, DistError> {
        if !(beta > 1.0) {
            return Err(DistError::InvalidParameter(format!("log-power hazard beta = {beta}")));
        }
        Ok(HazardSpec::LogPower { beta })
    }

    /// Smallest point of the domain where `Q` is defined and nondecreasing.
    pub fn domain_start(&self) -> f64 {
        match self {
            HazardSpec::Power { .. } => 0.0,
            HazardSpec::LogPower { .. } => 1.0,
        }
    }

    /// `Q(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            HazardSpec::Power { c, alpha } => c * x.max(0.0).powf(*alpha),
            HazardSpec::LogPower { beta } => x.max(1.0).ln().powf(*beta),
        }
    }

    /// Index exponent used in the `Q(x)/x^α` check.
    pub fn index(&self) -> f64 {
        match self {
            HazardSpec::Power { alpha, .. } => *alpha,
            HazardSpec::LogPower { .. } => 0.5,
        }
    }

    /// `Q(x)/x^α` at `x`.
    pub fn scaled(&self, x: f64) -> f64 {
        self.value(x) / x.powf(self.index())
    }

    /// Samples `Q` on `grid` and checks that `Q` is nondecreasing and that
    /// `Q(x)/x^α` is nonincreasing beyond `x0`. Heuristic only.
    pub fn check_shape(&self, grid: &[f64], x0: f64) -> Result<bool, DistError> {
        let pts: Vec<f64> = grid.iter().copied().filter(|x| *x >= self.domain_start()).collect();
        if pts.len() < 2 {
            return Err(DistError::GridTooShort(format!("{} usable points", pts.len())));
        }
        let slack = 1e-12;
        let monotone = pts.windows(2).all(|w| self.value(w[1]) >= self.value(w[0]) - slack);
        let beyond: Vec<f64> = pts.iter().copied().filter(|x| *x >= x0 && *x > 0.0).collect();
        let concave = beyond.windows(2).all(|w| self.scaled(w[1]) <= self.scaled(w[0]) * (1.0 + slack));
        Ok(monotone && concave)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_form_passes() {
        let q = HazardSpec::power(2.0, 0.5).unwrap();
        let grid: Vec<f64> = (1..200).map(|i| i as f64 * 10.0).collect();
        assert!(q.check_shape(&grid, 1.0).unwrap());
    }

    #[test]
    fn log_form_passes_beyond_threshold() {
        let q = HazardSpec::log_power(2.0).unwrap();
        let grid: Vec<f64> = (1..200).map(|i| (i as f64).powi(2)).collect();
        assert!(q.check_shape(&grid, 100.0).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HazardSpec::power(1.0, 1.5).is_err());
        assert!(HazardSpec::log_power(0.5).is_err());
    }
}
