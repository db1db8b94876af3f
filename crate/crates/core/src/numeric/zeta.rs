//! Hurwitz zeta function ζ(s, a) = Σ_{k≥0} (a + k)^{−s} for s > 1, a > 0.

const BERNOULLI_2J: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta by Euler–Maclaurin summation; relative accuracy near 1e−15.
///
/// Returns `f64::INFINITY` for `s <= 1`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(a > 0.0, "hurwitz_zeta requires a > 0, got {a}");
    if s <= 1.0 {
        return f64::INFINITY;
    }
    let shift = if a < 20.0 { (20.0 - a).ceil() as usize } else { 0 };
    let mut direct = 0.0;
    for k in 0..shift {
        direct += (a + k as f64).powf(-s);
    }
    let x = a + shift as f64;
    let mut sum = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    let mut rising = s; // s(s+1)…(s+2j−2)
    let mut fact = 2.0; // (2j)!
    let mut xpow = x.powf(-s - 1.0);
    let x2 = x * x;
    for (j, b) in BERNOULLI_2J.iter().enumerate() {
        let term = b / fact * rising * xpow;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        let jj = (j + 1) as f64;
        rising *= (s + 2.0 * jj - 1.0) * (s + 2.0 * jj);
        fact *= (2.0 * jj + 1.0) * (2.0 * jj + 2.0);
        xpow /= x2;
    }
    direct + sum
}
