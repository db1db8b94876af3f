//! Poisson probabilities evaluated in log space.

use statrs::function::gamma::ln_gamma;

/// `ln P(N = n)` for `N ~ Poisson(mean)`.
pub fn ln_pmf(n: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    nf * mean.ln() - mean - ln_gamma(nf + 1.0)
}

/// `P(N = n)` for `N ~ Poisson(mean)`.
pub fn pmf(n: usize, mean: f64) -> f64 {
    ln_pmf(n, mean).exp()
}

/// Poisson weights `P(N = n)` for `n = 0..` until the remaining mass is below
/// `cutoff`, together with the exact tails `P(N > n)`.
///
/// Tails are accumulated backwards from far beyond the cutoff so that small
/// tail values keep full relative precision.
pub fn weights_and_tails(mean: f64, cutoff: f64) -> (Vec<f64>, Vec<f64>) {
    let sd = mean.sqrt();
    let far = (mean + 40.0 * sd + 60.0).ceil() as usize;
    let mut w: Vec<f64> = (0..=far).map(|n| pmf(n, mean)).collect();
    let mut tails = vec![0.0; far + 1];
    let mut acc = 0.0;
    for n in (0..=far).rev() {
        tails[n] = acc;
        acc += w[n];
    }
    let mut last = far;
    for n in 0..=far {
        if tails[n] < cutoff && n as f64 >= mean {
            last = n;
            break;
        }
    }
    w.truncate(last + 1);
    tails.truncate(last + 1);
    (w, tails)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for &m in &[0.1, 1.0, 30.0, 400.0] {
            let (w, t) = weights_and_tails(m, 1e-14);
            let s: f64 = w.iter().sum();
            assert!((s + t[t.len() - 1] - 1.0).abs() < 1e-12, "mean {m}");
            assert!((t[0] - (1.0 - w[0])).abs() < 1e-12);
        }
    }
}
