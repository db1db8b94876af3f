//! First-passage matrices `G(k)`, `Φ(0)` and `L(k)`.

use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use super::{ChainError, Gig1Chain};
use crate::blockseq::{MatrixSeq, SeqTail};
use crate::numeric::linalg::{inf_norm, ones, single_class_stationary};

/// Consecutive non-improving checks after which `L` is taken as settled.
const PLATEAU_CHECKS: usize = 16;
/// Largest deviation from the limit accepted at a plateau.
const PLATEAU_TOL: f64 = 1e-9;

/// Iteration controls for [`first_passage`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassageOptions {
    /// Convergence tolerance (∞-norm) for `G` and for the limit of `L`.
    pub tol: f64,
    /// Cap on fixed-point sweeps per window.
    pub max_iterations: usize,
    /// Initial number of reblocked levels summed explicitly.
    pub initial_window: usize,
    /// Cap on the reblocked window.
    pub max_window: usize,
    /// Cap on the number of `L(k)` levels generated.
    pub max_l_levels: usize,
}

impl Default for FirstPassageOptions {
    fn default() -> Self {
        FirstPassageOptions {
            tol: 1e-12,
            max_iterations: 200_000,
            initial_window: 8,
            max_window: 1 << 15,
            max_l_levels: 1 << 20,
        }
    }
}

/// Convergence record of [`first_passage`].
#[derive(Debug, Clone, Serialize)]
pub struct FirstPassageDiagnostics {
    /// Total fixed-point sweeps.
    pub iterations: usize,
    /// Final reblocked window.
    pub window: usize,
    /// Change in `G` between the last two windows.
    pub window_change: f64,
    /// `‖G e − e‖_∞` for the reblocked `G`.
    pub stochasticity_residual: f64,
    /// Deviation of the last period average of `L` from its renewal limit.
    pub l_limit_change: f64,
}

/// `G(k)` for `1 ≤ k ≤ b_max`, `Φ(0)`, `L(k)` up to the level where it has
/// settled on its rank-one limit, and the detected period.
#[derive(Debug, Clone)]
pub struct FirstPassageBundle {
    /// `G(1), …, G(b_max)`.
    pub g: Vec<DMatrix<f64>>,
    /// Return-to-level matrix.
    pub phi0: DMatrix<f64>,
    /// `L(1), …, L(W)`.
    pub l: Vec<DMatrix<f64>>,
    /// Renewal limit `e ψ̂` of the period averages of `L`.
    pub l_limit: DMatrix<f64>,
    /// `ψ̂ = ν / (ν Σ_k k G(k) e)` with `ν` stationary for `Σ_k G(k)`.
    pub psi_hat: RowDVector<f64>,
    /// Heuristic period of the additive component.
    pub tau: usize,
    /// Convergence record.
    pub diagnostics: FirstPassageDiagnostics,
}

impl FirstPassageBundle {
    /// `L(k)`, using the stored limit beyond the explicit range.
    pub fn l_at(&self, k: usize) -> &DMatrix<f64> {
        if k == 0 {
            panic!("L(0) is not defined");
        }
        self.l.get(k - 1).unwrap_or(&self.l_limit)
    }

    /// `G(k)`; zero beyond `b_max`.
    pub fn g_at(&self, k: usize) -> DMatrix<f64> {
        let m = self.phi0.nrows();
        if k == 0 || k > self.g.len() {
            DMatrix::zeros(m, m)
        } else {
            self.g[k - 1].clone()
        }
    }

    /// Number of explicit `L` levels.
    pub fn l_levels(&self) -> usize {
        self.l.len()
    }
}

/// Greatest common divisor.
fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of the Markov additive kernel `{A(k)}`: the gcd of level increments
/// around cycles of the phase graph, found via a BFS potential. Heuristic.
pub fn additive_period(a: &MatrixSeq) -> Result<usize, ChainError> {
    let m = a.rows();
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    for k in a.k_min()..=a.k_max() {
        let blk = a.head_at(k).expect("within head");
        for i in 0..m {
            for j in 0..m {
                if blk[(i, j)] > 0.0 {
                    edges.push((i, j, k));
                }
            }
        }
    }
    match a.tail() {
        SeqTail::None => {}
        SeqTail::RankOne { .. } => {
            for k in a.k_max() + 1..=a.k_max() + 64 {
                let blk = a.at(k)?;
                for i in 0..m {
                    for j in 0..m {
                        if blk[(i, j)] > 0.0 {
                            edges.push((i, j, k));
                        }
                    }
                }
            }
        }
        SeqTail::Aggregate { mass, .. } => {
            // Individual levels beyond the head are unknown; any positive mass
            // is assumed to spread over consecutive levels.
            for i in 0..m {
                for j in 0..m {
                    if mass[(i, j)] > 0.0 {
                        edges.push((i, j, a.k_max() + 1));
                        edges.push((i, j, a.k_max() + 2));
                    }
                }
            }
        }
    }
    let mut pot: Vec<Option<i64>> = vec![None; m];
    pot[0] = Some(0);
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for &(s, t, k) in edges.iter().filter(|e| e.0 == i) {
            if pot[t].is_none() {
                pot[t] = Some(pot[s].unwrap() + k);
                queue.push_back(t);
            }
        }
    }
    let mut g = 0u64;
    for &(s, t, k) in &edges {
        if let (Some(ps), Some(pt)) = (pot[s], pot[t]) {
            g = gcd(g, (ps + k - pt).unsigned_abs());
        }
    }
    Ok(g.max(1) as usize)
}

fn block(m: &DMatrix<f64>, r: usize, c: usize, size: usize) -> DMatrix<f64> {
    m.view((r * size, c * size), (size, size)).into_owned()
}

/// Computes `G(k)` by a fixed-point iteration on the chain reblocked into
/// `b_max` levels, with an explicit window of reblocked levels that doubles
/// until `G` stops changing; then `L(k)` and `Φ(0)`.
pub fn first_passage(c: &Gig1Chain, opts: &FirstPassageOptions) -> Result<FirstPassageBundle, ChainError> {
    let b = c.b_max();
    let m = c.m();
    let bm = b * m;
    let bi = b as i64;
    let a = c.a();
    let horizon = a.horizon();

    let mut g_hat = DMatrix::<f64>::zeros(bm, bm);
    let mut iterations = 0usize;
    let mut window = opts.initial_window.max(1);
    let mut window_change = f64::INFINITY;
    let mut previous: Option<DMatrix<f64>> = None;
    let mut cached: Vec<DMatrix<f64>> = Vec::new();
    let mut cached_hi = -bi - 1;
    loop {
        // Largest level referenced: Ā((J+1)b + (b−1) − 1).
        let slack = (bi - 2).max(0);
        let mut j_win = window;
        if (j_win as i64 + 1) * bi + slack > horizon {
            j_win = ((horizon - slack) / bi - 1).max(0) as usize;
        }
        let hi = (j_win as i64 + 1) * bi;
        if hi > cached_hi {
            cached.extend(c.a_blocks(cached_hi + 1, hi)?);
            cached_hi = hi;
        }
        let a_at = |k: i64| -> &DMatrix<f64> { &cached[(k + bi) as usize] };
        let reblock = |j: i64| -> DMatrix<f64> {
            let mut out = DMatrix::zeros(bm, bm);
            for r in 0..b {
                for s in 0..b {
                    let k = j * bi + s as i64 - r as i64;
                    if k >= -bi {
                        out.view_mut((r * m, s * m), (m, m)).copy_from(a_at(k));
                    }
                }
            }
            out
        };
        let a_hat: Vec<DMatrix<f64>> = (-1..=j_win as i64).map(reblock).collect();
        // Row r lumps A(l), l ≥ (J+1)b − r: the first b − 1 levels go to
        // their own columns, the remainder to the last.
        let mut tail = DMatrix::zeros(bm, bm);
        for r in 0..b {
            let first = (j_win as i64 + 1) * bi - r as i64;
            for s in 0..b - 1 {
                tail.view_mut((r * m, s * m), (m, m)).copy_from(&a.at(first + s as i64)?);
            }
            let rest = a.overline(first + bi - 2)?;
            tail.view_mut((r * m, (b - 1) * m), (m, m)).copy_from(&rest);
        }
        let down = &a_hat[0];
        let eye = DMatrix::<f64>::identity(bm, bm);
        let mut converged = false;
        let mut diff = f64::INFINITY;
        for _ in 0..opts.max_iterations {
            iterations += 1;
            let mut s = &a_hat[j_win + 1] + &tail * &g_hat;
            for j in (0..j_win).rev() {
                s = &a_hat[j + 1] + s * &g_hat;
            }
            let lhs = &eye - s;
            let next = lhs.lu().solve(down).ok_or_else(|| ChainError::Singular("I − Σ Â(j) Ĝ^j".into()))?;
            diff = inf_norm(&(&next - &g_hat));
            g_hat = next;
            if diff < 0.1 * opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(ChainError::NotConverged { what: "G fixed-point iteration".into(), residual: diff });
        }
        if let Some(prev) = &previous {
            window_change = inf_norm(&(&g_hat - prev));
        }
        let capped = j_win < window || window >= opts.max_window;
        if window_change < opts.tol {
            break;
        }
        if capped {
            if previous.is_some() && window_change > 1e3 * opts.tol {
                return Err(ChainError::NotConverged { what: "G window doubling".into(), residual: window_change });
            }
            window = j_win;
            break;
        }
        previous = Some(g_hat.clone());
        window *= 2;
    }
    let stochasticity_residual = (&g_hat * ones(bm)).iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let g: Vec<DMatrix<f64>> = (1..=b).map(|d| block(&g_hat, 0, b - d, m)).collect();

    let tau = additive_period(a)?;
    let g_sum = g.iter().fold(DMatrix::zeros(m, m), |s, x| s + x);
    let ladder = single_class_stationary(&g_sum).ok_or(ChainError::Singular("stationary vector of Σ G(k)".into()))?;
    let mut ladder_mean = 0.0;
    for (i, gd) in g.iter().enumerate() {
        ladder_mean += (i + 1) as f64 * (&ladder * gd * ones(m))[0];
    }
    let psi_hat = &ladder / ladder_mean;
    let l_limit = ones(m) * &psi_hat;
    let mut l: Vec<DMatrix<f64>> = Vec::new();
    let mut l_limit_change = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut settled = false;
    for k in 1..=opts.max_l_levels {
        let mut next = if k <= b { g[k - 1].clone() } else { DMatrix::zeros(m, m) };
        for d in 1..=b.min(k - 1) {
            next.gemm(1.0, &g[d - 1], &l[k - d - 1], 1.0);
        }
        l.push(next);
        if k >= 2 * tau + b && k % tau == 0 {
            let mut avg = DMatrix::zeros(m, m);
            for lk in &l[k - tau..k] {
                avg += lk;
            }
            l_limit_change = inf_norm(&(avg / tau as f64 - &l_limit));
            if l_limit_change < opts.tol {
                settled = true;
                break;
            }
            if l_limit_change < 0.5 * best {
                best = l_limit_change;
                stale = 0;
            } else {
                stale += 1;
            }
            if stale >= PLATEAU_CHECKS && best < PLATEAU_TOL {
                settled = true;
                break;
            }
        }
    }
    if !settled {
        return Err(ChainError::NotConverged { what: "L(k) limit".into(), residual: l_limit_change });
    }

    let reach = (a.horizon().max(0) as usize).min(l.len());
    let mut phi0 = a.at(0)? + a.overline(0)? * &l_limit;
    for (i, lk) in l[..reach].iter().enumerate() {
        let am = a.at(i as i64 + 1)?;
        phi0.gemm(1.0, &am, &(lk - &l_limit), 1.0);
    }
    phi0.iter_mut().for_each(|v| *v = v.max(0.0));

    Ok(FirstPassageBundle {
        g,
        phi0,
        l,
        l_limit,
        psi_hat,
        tau,
        diagnostics: FirstPassageDiagnostics {
            iterations,
            window,
            window_change,
            stochasticity_residual,
            l_limit_change,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockseq::MatrixSeq;

    fn scalar_chain(up: f64, stay: f64, down: f64) -> Gig1Chain {
        let a = MatrixSeq::scalar(-1, &[down, stay, up]).unwrap();
        let b_up = MatrixSeq::scalar(1, &[up]).unwrap();
        Gig1Chain::new(DMatrix::from_element(1, 1, 1.0 - up), b_up, vec![DMatrix::from_element(1, 1, down)], a).unwrap()
    }

    #[test]
    fn forced_descent() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let cycle = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let a = MatrixSeq::finite(-1, vec![cycle.clone()]).unwrap();
        let b_up = MatrixSeq::finite(1, vec![DMatrix::zeros(3, 3)]).unwrap();
        let c = Gig1Chain::new(eye.clone(), b_up, vec![cycle.clone()], a).unwrap();
        let fp = first_passage(&c, &FirstPassageOptions::default()).unwrap();
        assert!(inf_norm(&(&fp.g[0] - &cycle)) < 1e-14);
        assert!(inf_norm(&(&fp.l_limit - DMatrix::from_element(3, 3, 1.0 / 3.0))) < 1e-14);
    }

    #[test]
    fn scalar_skip_free() {
        let c = scalar_chain(0.3, 0.1, 0.6);
        let fp = first_passage(&c, &FirstPassageOptions::default()).unwrap();
        // Minimal root of p g² + r g + q = g is 1 when q > p.
        assert!((fp.g[0][(0, 0)] - 1.0).abs() < 1e-12);
        // Φ(0) = r + p·G(1) = 0.4.
        assert!((fp.phi0[(0, 0)] - 0.4).abs() < 1e-12);
        assert_eq!(fp.tau, 1);
    }

    #[test]
    fn period_two_walk() {
        let a = MatrixSeq::scalar(-2, &[0.6, 0.0, 0.0, 0.0, 0.4]).unwrap();
        assert_eq!(additive_period(&a).unwrap(), 2);
    }
}
