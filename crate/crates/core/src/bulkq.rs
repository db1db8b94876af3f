//! MAP/GI^(a,b)/1 queue: the departure-epoch chain, the mean cycle, the
//! time-stationary distribution and the tail asymptotes.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use crate::asymptotics::{ReferenceTail, TailPrediction};
use crate::blockseq::{MatrixSeq, SeqTail};
use crate::bmapq::{kernels_with, Bmap, KernelMethod, Kernels, QueueError, MIN_KERNEL_LEVELS};
use crate::gig1core::{stationary, Gig1Chain, Method, StationarySolution};
use crate::heavytail::ServiceDist;
use crate::numeric::linalg::ones;

/// Single-arrival MAP feeding a server under the `(a, b)` bulk-service rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkModel {
    map: Bmap,
    service: ServiceDist,
    a: usize,
    b: usize,
}

impl BulkModel {
    /// Requires single arrivals, `1 ≤ a ≤ b` and `ρ < b`.
    pub fn new(map: Bmap, service: ServiceDist, a: usize, b: usize) -> Result<Self, QueueError> {
        if !map.is_single_arrival() {
            return Err(QueueError::InvalidBmap("bulk service needs single arrivals, D(k) = 0 for k ≥ 2".into()));
        }
        if !(1 <= a && a <= b) {
            return Err(QueueError::InvalidArgument(format!("thresholds a = {a}, b = {b} must satisfy 1 ≤ a ≤ b")));
        }
        service.validate()?;
        let rho = map.lambda() * service.mean();
        if !(rho < b as f64) {
            return Err(QueueError::Unstable { rho, limit: b as f64 });
        }
        Ok(BulkModel { map, service, a, b })
    }

    /// Arrival process.
    pub fn map(&self) -> &Bmap {
        &self.map
    }

    /// Service law.
    pub fn service(&self) -> &ServiceDist {
        &self.service
    }

    /// Lower threshold.
    pub fn a(&self) -> usize {
        self.a
    }

    /// Batch capacity.
    pub fn b(&self) -> usize {
        self.b
    }

    /// `ρ = λh`.
    pub fn rho(&self) -> f64 {
        self.map.lambda() * self.service.mean()
    }

    /// `D(1)`.
    pub fn d(&self) -> DMatrix<f64> {
        self.map.d().at(1).expect("single-arrival blocks are stored")
    }
}

/// `W = (−C)^{−1} D`, the phase at the next arrival.
pub fn phase_step(m: &BulkModel) -> Result<DMatrix<f64>, QueueError> {
    let lu = (-m.map().c()).clone().lu();
    lu.solve(&m.d()).ok_or_else(|| QueueError::InvalidBmap("C is singular".into()))
}

/// `W^j` for `j = 0..=n`, by repeated solves.
fn step_powers(m: &BulkModel, n: usize) -> Result<Vec<DMatrix<f64>>, QueueError> {
    let lu = (-m.map().c()).clone().lu();
    let d = m.d();
    let mut out = vec![DMatrix::identity(m.map().phases(), m.map().phases())];
    for _ in 0..n {
        let next = lu
            .solve(&(&d * out.last().expect("nonempty")))
            .ok_or_else(|| QueueError::InvalidBmap("C is singular".into()))?;
        out.push(next);
    }
    Ok(out)
}

/// Kernels on `0..=levels` for the bulk model.
pub fn bulk_kernels(m: &BulkModel, levels: usize) -> Result<Kernels, QueueError> {
    kernels_with(m.map(), m.service(), levels, KernelMethod::Auto)
}

/// Departure-epoch chain re-blocked as a GI/G/1-type chain: levels
/// `0..b−1` form level 0 and level `n ≥ 1` is queue length `b − 1 + n`.
pub fn build_embedded(m: &BulkModel, k: &Kernels) -> Result<Gig1Chain, QueueError> {
    let (a, b) = (m.a(), m.b());
    if k.levels < 2 * b + 1 {
        return Err(QueueError::InvalidArgument(format!("kernels need at least {} levels", 2 * b + 1)));
    }
    let n = m.map().phases();
    let pw = step_powers(m, a)?;
    let (mass, excess) = match k.p.tail() {
        SeqTail::Aggregate { mass, excess } => (mass.clone(), excess.clone()),
        _ => unreachable!("kernels carry aggregate tails"),
    };
    let head = k.p.head();
    // Row block l of level 0: W^{a−l} for l < a, identity otherwise.
    let row_factor = |l: usize| if l < a { &pw[a - l] } else { &pw[0] };
    let stack = |blk: &DMatrix<f64>| -> DMatrix<f64> {
        let mut s = DMatrix::zeros(b * n, n);
        for l in 0..b {
            s.view_mut((l * n, 0), (n, n)).copy_from(&(row_factor(l) * blk));
        }
        s
    };
    let mut b0 = DMatrix::zeros(b * n, b * n);
    for l in 0..b {
        for j in 0..b {
            b0.view_mut((l * n, j * n), (n, n)).copy_from(&(row_factor(l) * &head[j]));
        }
    }
    let up: Vec<DMatrix<f64>> = head[b..].iter().map(stack).collect();
    let up_mass = stack(&mass);
    let up_excess = excess.as_ref().map(|x| {
        let mut s = DVector::zeros(b * n);
        for l in 0..b {
            s.rows_mut(l * n, n).copy_from(&(row_factor(l) * x));
        }
        s
    });
    let b_up = MatrixSeq::with_aggregate_tail(1, up, up_mass, up_excess)?;
    let b_down: Vec<DMatrix<f64>> = (1..=b)
        .map(|kk| {
            let mut s = DMatrix::zeros(n, b * n);
            for j in (kk - 1)..b {
                s.view_mut((0, j * n), (n, n)).copy_from(&head[j + 1 - kk]);
            }
            s
        })
        .collect();
    let a_seq = MatrixSeq::with_aggregate_tail(-(b as i64), head.to_vec(), mass, excess)?;
    Ok(Gig1Chain::new(b0, b_up, b_down, a_seq)?)
}

/// Splits a re-blocked solution back into per-level vectors `y₊(k)`.
pub fn departure_distribution(m: &BulkModel, sol: &StationarySolution) -> StationarySolution {
    let (b, n) = (m.b(), m.map().phases());
    let mut levels: Vec<RowDVector<f64>> = (0..b).map(|l| sol.x0.columns(l * n, n).clone_owned()).collect();
    levels.extend(sol.x.iter().cloned());
    let top = levels.len() - 1;
    let mut tail = vec![RowDVector::zeros(n); top + 1];
    for k in (b - 1)..=top {
        tail[k] = sol.tail[k + 1 - b].clone();
    }
    for k in (0..b - 1).rev() {
        tail[k] = &tail[k + 1] + &levels[k + 1];
    }
    StationarySolution {
        x0: levels[0].clone(),
        x: levels[1..].to_vec(),
        tail,
        deficit: sol.deficit,
        method: sol.method,
    }
}

fn level(sol: &StationarySolution, k: usize) -> &RowDVector<f64> {
    if k == 0 {
        &sol.x0
    } else {
        &sol.x[k - 1]
    }
}

/// Mean inter-departure time
/// `η = h + Σ_{k<a} y₊(k) Σ_{l<a−k} W^l (−C)^{−1} e`.
pub fn mean_cycle(m: &BulkModel, departure: &StationarySolution) -> Result<f64, QueueError> {
    let a = m.a();
    let pw = step_powers(m, a)?;
    let n = m.map().phases();
    let idle =
        (-m.map().c()).clone().lu().solve(&ones(n)).ok_or_else(|| QueueError::InvalidBmap("C is singular".into()))?;
    let mut eta = m.service().mean();
    for k in 0..a {
        let mut s = DVector::<f64>::zeros(n);
        for p in pw.iter().take(a - k) {
            s += p * &idle;
        }
        eta += (level(departure, k) * s)[0];
    }
    Ok(eta)
}

/// Time-stationary distribution `y(k)` on the levels of `departure`.
pub fn time_stationary(
    m: &BulkModel,
    k: &Kernels,
    departure: &StationarySolution,
    eta: f64,
) -> Result<StationarySolution, QueueError> {
    let a = m.a();
    let n = m.map().phases();
    let top = departure.levels();
    if k.levels < top {
        return Err(QueueError::InvalidArgument("kernels shorter than the departure distribution".into()));
    }
    let h = m.service().mean();
    let pw = step_powers(m, a)?;
    let lu = (-m.map().c()).clone().lu();
    let inv_c = lu.solve(&DMatrix::identity(n, n)).ok_or_else(|| QueueError::InvalidBmap("C is singular".into()))?;
    let pe: Vec<DMatrix<f64>> = (0..=top as i64).map(|l| k.pe.at(l)).collect::<Result<_, _>>()?;
    let pe_bar: Vec<DMatrix<f64>> = (0..=top as i64).map(|l| k.pe.overline(l)).collect::<Result<_, _>>()?;
    let mut start = RowDVector::<f64>::zeros(n);
    for l in 0..=a.min(top) {
        start += level(departure, l) * &pw[a - l];
    }
    let mut y = Vec::with_capacity(top + 1);
    for kk in 0..a.min(top + 1) {
        let mut acc = RowDVector::<f64>::zeros(n);
        for l in 0..=kk {
            acc += level(departure, l) * &pw[kk - l];
        }
        y.push(acc * &inv_c / eta);
    }
    let mut tail_from_a = Vec::with_capacity(top + 1);
    for kk in a..=top {
        let mut acc = &start * &pe[kk - a];
        let mut over = &start * &pe_bar[kk - a];
        for l in (a + 1)..=kk {
            acc += level(departure, l) * &pe[kk - l];
            over += level(departure, l) * &pe_bar[kk - l];
        }
        over += &departure.tail[kk] * &k.pe_total;
        y.push(acc * (h / eta));
        tail_from_a.push(over * (h / eta));
    }
    let mut tail = vec![RowDVector::zeros(n); top + 1];
    for (t, v) in tail.iter_mut().skip(a).zip(tail_from_a) {
        *t = v;
    }
    for kk in (0..a.min(top + 1)).rev() {
        if kk < top {
            tail[kk] = &tail[kk + 1] + &y[kk + 1];
        }
    }
    let deficit = tail[top].sum();
    Ok(StationarySolution { x0: y[0].clone(), x: y[1..].to_vec(), tail, deficit, method: Method::MatrixAnalytic })
}

/// Departure-epoch and time-stationary distributions with the mean cycle.
#[derive(Debug, Clone)]
pub struct BulkSolution {
    /// `y₊(k)`.
    pub departure: StationarySolution,
    /// `y(k)`.
    pub time: StationarySolution,
    /// `η`.
    pub eta: f64,
    /// Kernels used.
    pub kernels: Kernels,
    /// Re-blocked embedded chain.
    pub chain: Gig1Chain,
}

impl BulkSolution {
    /// `Σ_k y(k) e` including the mass beyond the stored range.
    pub fn time_total(&self) -> f64 {
        self.time.x0.sum() + self.time.tail_mass(0)
    }

    /// `Σ_k y₊(k) e` including the mass beyond the stored range.
    pub fn departure_total(&self) -> f64 {
        self.departure.x0.sum() + self.departure.tail_mass(0)
    }
}

/// Solves the bulk queue on queue lengths `0..=levels`.
pub fn solve_bulk(m: &BulkModel, levels: usize) -> Result<BulkSolution, QueueError> {
    let b = m.b();
    let kernels = bulk_kernels(m, (levels + b + 1).max(MIN_KERNEL_LEVELS))?;
    let chain = build_embedded(m, &kernels)?;
    let chain_levels = (levels + 1).saturating_sub(b).max(1);
    let sol = stationary(&chain, chain_levels)?;
    let departure = departure_distribution(m, &sol);
    let eta = mean_cycle(m, &departure)?;
    let time = time_stationary(m, &kernels, &departure, eta)?;
    Ok(BulkSolution { departure, time, eta, kernels, chain })
}

/// `ρ/(b − ρ) ϖ` for `ȳ₊(k)` and `(h/η) b/(b − ρ) ϖ` for `ȳ(k)`, both
/// against `H̄ₑ(k/λ)`.
pub fn bulk_tail_asymptotes(m: &BulkModel, sol: &BulkSolution) -> Result<(TailPrediction, TailPrediction), QueueError> {
    if m.service().is_light_tailed() {
        return Err(QueueError::InconsistentInput("the bulk tail asymptote needs a heavy-tailed service law".into()));
    }
    let (rho, b) = (m.rho(), m.b() as f64);
    let w = m.map().varpi();
    let reference = ReferenceTail::ScaledEquilibrium { service: m.service().clone(), rate: m.map().lambda() };
    let departure = w * (rho / (b - rho));
    let time = w * (m.service().mean() / sol.eta * b / (b - rho));
    Ok((
        TailPrediction { prefactor: departure.iter().copied().collect(), reference: reference.clone() },
        TailPrediction { prefactor: time.iter().copied().collect(), reference },
    ))
}

/// Worst phase ratios of `A̿(k)e` and `B̿(k)e` to `ρ H̄ₑ(k/λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockTailPoint {
    /// Level.
    pub k: usize,
    /// `max_i |[A̿(k)e]_i / (ρ H̄ₑ(k/λ)) − 1|`.
    pub a_deviation: f64,
    /// `max_i |[B̿(k)e]_i / (ρ H̄ₑ(k/λ)) − 1|`.
    pub b_deviation: f64,
}

/// Deviations of the embedded block tails from `ρ e H̄ₑ(k/λ)`.
pub fn block_tail_deviation(
    m: &BulkModel,
    chain: &Gig1Chain,
    levels: &[usize],
) -> Result<Vec<BlockTailPoint>, QueueError> {
    let scale = |k: usize| m.rho() * m.service().eq_tail(k as f64 / m.map().lambda());
    let dev = |v: DVector<f64>, s: f64| v.iter().map(|x| (x / s - 1.0).abs()).fold(0.0, f64::max);
    levels
        .iter()
        .map(|&k| {
            let s = scale(k);
            Ok(BlockTailPoint {
                k,
                a_deviation: dev(chain.a().double_overline_e(k as i64)?, s),
                b_deviation: dev(chain.b_up().double_overline_e(k as i64)?, s),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_phase_map(scale: f64) -> Bmap {
        let c = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.3, -1.0]) * scale;
        let d = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.2, 0.5]) * scale;
        Bmap::map(c, d).unwrap()
    }

    #[test]
    fn phase_step_is_stochastic() {
        let m = BulkModel::new(two_phase_map(1.0), ServiceDist::Exponential { rate: 1.0 }, 2, 3).unwrap();
        let w = phase_step(&m).unwrap();
        assert!((w * ones(2) - ones(2)).abs().max() < 1e-12);
    }

    #[test]
    fn rejects_unstable_and_bad_thresholds() {
        let map = two_phase_map(1.0);
        let h = 3.5 / map.lambda();
        assert!(matches!(
            BulkModel::new(map.clone(), ServiceDist::Deterministic { value: h }, 1, 3),
            Err(QueueError::Unstable { .. })
        ));
        assert!(BulkModel::new(map, ServiceDist::Exponential { rate: 1.0 }, 3, 2).is_err());
    }

    #[test]
    fn small_bulk_model_is_normalized() {
        let m = BulkModel::new(two_phase_map(1.0), ServiceDist::Exponential { rate: 0.6 }, 2, 3).unwrap();
        let sol = solve_bulk(&m, 200).unwrap();
        let r = sol.chain.validate().unwrap();
        assert!(r.row_sum_residual < 1e-12);
        assert!((sol.departure_total() - 1.0).abs() < 1e-10);
        assert!((sol.time_total() - 1.0).abs() < 1e-8, "time total {}", sol.time_total());
        assert!(sol.eta >= m.service().mean());
    }
}
