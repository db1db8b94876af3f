//! BMAP/GI/1 queue: the arrival process, uniformization, the kernels `P(k)`
//! and `Pₑ(k)`, the embedded M/G/1-type chain and the regime asymptotes.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{ReferenceTail, TailPrediction};
use crate::blockseq::{MatrixSeq, SeqError, SeqTail};
use crate::gig1core::{stationary, ChainError, Gig1Chain, StationarySolution};
use crate::heavytail::service::MAX_MIXTURE_TERMS;
use crate::heavytail::{discretized_equilibrium, DiscreteDist, DistError, ServiceDist};
use crate::numeric::blocks::{axpy, convolve_truncated, from_flat, max_row_sum, mul_acc, to_flat};
use crate::numeric::linalg::{generator_stationary, ones, strongly_connected};

/// Tolerance on `(C + Σ D(k)) e = 0`, relative to `max(1, θ)`.
pub const GENERATOR_TOL: f64 = 1e-12;
/// The uniformization series stops once the remaining weight times the
/// remaining head mass falls below this.
pub const SERIES_TOL: f64 = 1e-15;
/// The series for `P̂(1)` stops once the remaining weight times the
/// distance of the current power from `eϖ` falls below this.
pub const TOTAL_SERIES_TOL: f64 = 1e-17;
/// Smallest kernel horizon used by the stationary solvers.
pub const MIN_KERNEL_LEVELS: usize = 256;
/// Bound on the residual of `P̄(k)e = h (Pₑ ∗ D̄)(k) e`.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Relative tolerance on `ϖ d̃_G = λ`.
pub const BATCH_LIMIT_TOL: f64 = 1e-8;

/// Failures of the queue front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    /// The arrival process violates its defining conditions.
    #[error("invalid BMAP: {0}")]
    InvalidBmap(String),
    /// The offered load is not below the server capacity.
    #[error("offered load rho = {rho} is not below {limit}")]
    Unstable {
        /// `λh`.
        rho: f64,
        /// Capacity.
        limit: f64,
    },
    /// A regime input is neither supplied nor derivable.
    #[error("missing regime input: {0}")]
    MissingInput(String),
    /// A supplied input contradicts the model.
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
    /// `P̄(k)e = h (Pₑ ∗ D̄)(k) e` fails beyond its bound.
    #[error("kernel identity residual {residual:e} at level {level} exceeds {bound:e}")]
    IdentityResidual {
        /// Sup-norm residual.
        residual: f64,
        /// Level attaining it.
        level: usize,
        /// Bound.
        bound: f64,
    },
    /// The uniformization series did not terminate.
    #[error("uniformization series needs more than {0} terms")]
    SeriesCap(usize),
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

/// Batch Markovian arrival process `{C, D(1), D(2), …}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bmap {
    c: DMatrix<f64>,
    d: MatrixSeq,
    varpi: RowDVector<f64>,
    lambda: f64,
    lambda_g: f64,
    theta: f64,
}

impl Bmap {
    /// Validates `C` and the batch blocks `D(k)`, `k ≥ 1`.
    pub fn new(c: DMatrix<f64>, d: MatrixSeq) -> Result<Self, QueueError> {
        let m = c.nrows();
        if m == 0 || c.ncols() != m || d.rows() != m || d.cols() != m {
            return Err(QueueError::InvalidBmap("C and D(k) must be square of equal order".into()));
        }
        if d.k_min() < 1 {
            return Err(QueueError::InvalidBmap(format!("D(k) starts at level {}, expected k ≥ 1", d.k_min())));
        }
        for i in 0..m {
            if !(c[(i, i)] < 0.0) {
                return Err(QueueError::InvalidBmap(format!("C[{i},{i}] = {} is not negative", c[(i, i)])));
            }
            for j in 0..m {
                if i != j && !(c[(i, j)] >= 0.0) {
                    return Err(QueueError::InvalidBmap(format!("C[{i},{j}] = {} is negative", c[(i, j)])));
                }
            }
        }
        let theta = (0..m).map(|j| c[(j, j)].abs()).fold(0.0, f64::max);
        let q = &c + d.total();
        let row = (&q * ones(m)).abs().max();
        if row > GENERATOR_TOL * theta.max(1.0) {
            return Err(QueueError::InvalidBmap(format!("(C + D) e deviates from zero by {row:e}")));
        }
        let mut adj = q.abs();
        adj.fill_diagonal(0.0);
        if !strongly_connected(&adj, 0.0) {
            return Err(QueueError::InvalidBmap("C + D is reducible".into()));
        }
        let varpi =
            generator_stationary(&q).ok_or_else(|| QueueError::InvalidBmap("C + D has no stationary vector".into()))?;
        let lambda = (&varpi
            * d.first_moment_e().map_err(|_| QueueError::InvalidBmap("batch sizes need a finite mean".into()))?)[0];
        let lambda_g = (&varpi * d.total() * ones(m))[0];
        if !(lambda > 0.0) {
            return Err(QueueError::InvalidBmap("mean arrival rate is zero".into()));
        }
        Ok(Bmap { c, d, varpi, lambda, lambda_g, theta })
    }

    /// Poisson arrivals of single customers.
    pub fn poisson(rate: f64) -> Result<Self, QueueError> {
        Self::new(DMatrix::from_element(1, 1, -rate), MatrixSeq::scalar(1, &[rate])?)
    }

    /// Markovian arrival process with single arrivals `D(1) = d1`.
    pub fn map(c: DMatrix<f64>, d1: DMatrix<f64>) -> Result<Self, QueueError> {
        Self::new(c, MatrixSeq::finite(1, vec![d1])?)
    }

    /// `C`.
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// `{D(k)}`.
    pub fn d(&self) -> &MatrixSeq {
        &self.d
    }

    /// Number of phases `M`.
    pub fn phases(&self) -> usize {
        self.c.nrows()
    }

    /// Stationary vector `ϖ` of `C + D`.
    pub fn varpi(&self) -> &RowDVector<f64> {
        &self.varpi
    }

    /// Mean arrival rate `λ = ϖ Σ k D(k) e`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Batch arrival rate `λ_G = ϖ D e`.
    pub fn lambda_g(&self) -> f64 {
        self.lambda_g
    }

    /// Uniformization rate `θ = max_j |C_jj|`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Generator `Q = C + D` of the phase process.
    pub fn generator(&self) -> DMatrix<f64> {
        &self.c + self.d.total()
    }

    /// Only batches of size one occur.
    pub fn is_single_arrival(&self) -> bool {
        self.d.k_max() <= 1 && matches!(self.d.tail(), SeqTail::None)
    }

    /// `D'e = Σ k D(k) e`.
    pub fn batch_moment_e(&self) -> DVector<f64> {
        self.d.first_moment_e().expect("validated on construction")
    }

    /// `e ϖ`.
    pub fn e_varpi(&self) -> DMatrix<f64> {
        ones(self.phases()) * &self.varpi
    }

    /// `(e ϖ − Q)^{−1}`.
    pub fn deviation_inverse(&self) -> DMatrix<f64> {
        (self.e_varpi() - self.generator()).try_inverse().expect("eϖ − Q is nonsingular for irreducible Q")
    }
}

/// BMAP/GI/1 queue.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueModel {
    bmap: Bmap,
    service: ServiceDist,
}

impl QueueModel {
    /// Requires `ρ = λh < 1`.
    pub fn new(bmap: Bmap, service: ServiceDist) -> Result<Self, QueueError> {
        service.validate()?;
        let rho = bmap.lambda() * service.mean();
        if !(rho < 1.0) {
            return Err(QueueError::Unstable { rho, limit: 1.0 });
        }
        Ok(QueueModel { bmap, service })
    }

    /// Arrival process.
    pub fn bmap(&self) -> &Bmap {
        &self.bmap
    }

    /// Service law.
    pub fn service(&self) -> &ServiceDist {
        &self.service
    }

    /// `ρ = λh`.
    pub fn rho(&self) -> f64 {
        self.bmap.lambda() * self.service.mean()
    }
}

/// Batch size `G` and its discretized equilibrium law `G_de`.
pub fn batch_distributions(b: &Bmap) -> Result<(DiscreteDist, DiscreteDist), QueueError> {
    let lam_g = b.lambda_g();
    if !(lam_g > 0.0) {
        return Err(QueueError::InvalidBmap("batch arrival rate is zero".into()));
    }
    let m = b.phases();
    let d = b.d();
    let k_max = d.k_max().max(0) as usize;
    let mut pmf = vec![0.0; k_max + 1];
    for (k, p) in pmf.iter_mut().enumerate().skip(1) {
        *p = (b.varpi() * d.at(k as i64)? * ones(m))[0] / lam_g;
    }
    let g = match d.tail() {
        SeqTail::RankOne { v, w, dist } => {
            let scale = (b.varpi() * v)[0] * w.sum() / lam_g;
            let total = pmf.iter().sum::<f64>() + scale * dist.tail(k_max as i64);
            pmf.iter_mut().for_each(|p| *p /= total);
            DiscreteDist::head_tail(pmf, scale / total, dist.clone())?
        }
        SeqTail::None => {
            let total: f64 = pmf.iter().sum();
            DiscreteDist::finite(pmf.into_iter().map(|p| p / total).collect())?
        }
        SeqTail::Aggregate { .. } => {
            return Err(QueueError::InvalidBmap("batch blocks need finite support or a rank-one tail".into()))
        }
    };
    let g_de = discretized_equilibrium(&g)?;
    Ok((g, g_de))
}

/// `Λ(0) = I + C/θ`, `Λ(k) = D(k)/θ`.
pub fn uniformize(b: &Bmap) -> Result<MatrixSeq, QueueError> {
    let m = b.phases();
    let theta = b.theta();
    let d = b.d();
    let mut head = vec![DMatrix::identity(m, m) + b.c() / theta];
    for k in 1..=d.k_max().max(0) {
        head.push(d.at(k)? / theta);
    }
    Ok(match d.tail() {
        SeqTail::RankOne { v, w, dist } => MatrixSeq::with_rank_one_tail(0, head, v / theta, w.clone(), dist.clone())?,
        _ => MatrixSeq::finite(0, head)?,
    })
}

/// How the kernels are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelMethod {
    /// Resolvent recursion for exponential/Erlang laws, uniformization otherwise.
    Auto,
    /// `(μI − C) P(k) = μ δ_{k0} I + Σ_j D(j) P(k − j)`, convolved for Erlang.
    Resolvent,
    /// `P(k) = Σ_n γ_n Λ^{∗n}(k)`.
    Uniformization,
}

/// `P(k)` and `Pₑ(k)` on `0..=levels`, with exact aggregate tails.
#[derive(Debug, Clone)]
pub struct Kernels {
    /// Arrivals during a service, by phase.
    pub p: MatrixSeq,
    /// Arrivals during an equilibrium residual service.
    pub pe: MatrixSeq,
    /// `P̂(1) = ∫ e^{Qx} dH(x)`.
    pub p_total: DMatrix<f64>,
    /// `P̂ₑ(1)`.
    pub pe_total: DMatrix<f64>,
    /// Last explicit level.
    pub levels: usize,
    /// Terms used by the uniformization series, zero for the resolvent.
    pub series_terms: usize,
    /// Method used.
    pub method: KernelMethod,
}

/// Kernels for `m` on `0..=levels`.
pub fn kernels(m: &QueueModel, levels: usize) -> Result<Kernels, QueueError> {
    kernels_with(m.bmap(), m.service(), levels, KernelMethod::Auto)
}

/// Kernels for an arbitrary arrival process and service law.
pub fn kernels_with(
    b: &Bmap,
    service: &ServiceDist,
    levels: usize,
    method: KernelMethod,
) -> Result<Kernels, QueueError> {
    service.validate()?;
    let method = match (method, service) {
        (KernelMethod::Auto, ServiceDist::Exponential { .. } | ServiceDist::Erlang { .. }) => KernelMethod::Resolvent,
        (KernelMethod::Auto, _) => KernelMethod::Uniformization,
        (KernelMethod::Resolvent, ServiceDist::Deterministic { .. } | ServiceDist::Pareto { .. }) => {
            return Err(QueueError::InvalidArgument(
                "the resolvent recursion needs exponential or Erlang service".into(),
            ))
        }
        (other, _) => other,
    };
    let n = b.phases();
    let blocks = levels + 1;
    let d_flat = batch_blocks(b, levels)?;
    let (p, pe, terms) = match method {
        KernelMethod::Resolvent => {
            let (shape, rate) = match service {
                ServiceDist::Exponential { rate } => (1, *rate),
                ServiceDist::Erlang { shape, rate } => (*shape as usize, *rate),
                _ => unreachable!(),
            };
            let one = exponential_kernel(b, rate, &d_flat, blocks)?;
            let mut pe = one.clone();
            let mut cur = one.clone();
            for _ in 1..shape {
                cur = convolve_truncated(&cur, &one, n, blocks);
                axpy(&mut pe, 1.0, &cur);
            }
            pe.iter_mut().for_each(|v| *v /= shape as f64);
            (cur, pe, 0)
        }
        _ => uniformization_kernel(b, service, &d_flat, blocks)?,
    };
    let p_total = laplace_total(b, service)?;
    let h = service.mean();
    let dev = b.deviation_inverse();
    let ev = b.e_varpi();
    let eye = DMatrix::<f64>::identity(n, n);
    let pe_total = ((&eye - &p_total) / h + &ev) * &dev;
    let de = b.batch_moment_e();
    let p_first = &pe_total * &de * h;
    let pe_first = service.eq_mean().map(|he| (&ev * he + &eye - &pe_total) * &dev * &de);
    Ok(Kernels {
        p: assemble(&p, n, blocks, &p_total, Some(p_first))?,
        pe: assemble(&pe, n, blocks, &pe_total, pe_first)?,
        p_total,
        pe_total,
        levels,
        series_terms: terms,
        method,
    })
}

/// `D(1..=s)` as flat blocks, `s` the last nonzero level up to `levels`.
fn batch_blocks(b: &Bmap, levels: usize) -> Result<Vec<Vec<f64>>, QueueError> {
    let d = b.d();
    let support = match d.tail() {
        SeqTail::None => (d.k_max().max(0) as usize).min(levels),
        _ => levels,
    };
    (1..=support as i64).map(|k| Ok(to_flat(&d.at(k)?))).collect()
}

fn exponential_kernel(b: &Bmap, mu: f64, d: &[Vec<f64>], blocks: usize) -> Result<Vec<f64>, QueueError> {
    let n = b.phases();
    let sz = n * n;
    let f = (DMatrix::identity(n, n) * mu - b.c())
        .try_inverse()
        .ok_or_else(|| QueueError::InvalidArgument("μI − C is singular".into()))?;
    let f = to_flat(&f);
    let mut p = vec![0.0; blocks * sz];
    p[..sz].iter_mut().zip(&f).for_each(|(o, v)| *o = (mu * v).max(0.0));
    let mut acc = vec![0.0; sz];
    for k in 1..blocks {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (j, dj) in d.iter().enumerate().take(k) {
            let src = (k - j - 1) * sz;
            mul_acc(&mut acc, dj, &p[src..src + sz], n);
        }
        let dst = &mut p[k * sz..(k + 1) * sz];
        mul_acc(dst, &f, &acc, n);
        dst.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Ok(p)
}

fn uniformization_kernel(
    b: &Bmap,
    service: &ServiceDist,
    d: &[Vec<f64>],
    blocks: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize), QueueError> {
    let n = b.phases();
    let sz = n * n;
    let theta = b.theta();
    let th = theta * service.mean();
    let mut lam: Vec<Vec<f64>> = vec![to_flat(&(DMatrix::identity(n, n) + b.c() / theta))];
    lam.extend(d.iter().map(|dk| dk.iter().map(|v| v / theta).collect()));
    let stay_zero = lam[0].iter().all(|v| *v == 0.0);

    let mut z = vec![0.0; blocks * sz];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let mut next = vec![0.0; blocks * sz];
    let mut p = vec![0.0; blocks * sz];
    let mut pe = vec![0.0; blocks * sz];
    let mut lo = 0usize;
    let mut recheck = 0usize;
    for step in 0..MAX_MIXTURE_TERMS {
        let w = service.mixture_weight(step, theta)?;
        let tail = service.mixture_tail(step, theta)?;
        axpy(&mut p[lo * sz..], w, &z[lo * sz..]);
        axpy(&mut pe[lo * sz..], tail / th, &z[lo * sz..]);
        let mut head = vec![0.0; sz];
        for k in lo..blocks {
            axpy(&mut head, 1.0, &z[k * sz..(k + 1) * sz]);
        }
        let mass = max_row_sum(&head, n);
        if tail * mass < SERIES_TOL && step >= recheck {
            let eq_tail = service.eq_mixture_tail(step, theta)?;
            if eq_tail * mass < SERIES_TOL {
                return Ok((p, pe, step + 1));
            }
            recheck = step + 32;
        }
        next[lo * sz..].iter_mut().for_each(|v| *v = 0.0);
        for k in lo..blocks {
            let dst = &mut next[k * sz..(k + 1) * sz];
            for (j, lj) in lam.iter().enumerate().take(k - lo + 1) {
                let src = (k - j) * sz;
                mul_acc(dst, &z[src..src + sz], lj, n);
            }
        }
        std::mem::swap(&mut z, &mut next);
        if stay_zero {
            lo += 1;
            if lo >= blocks {
                return Ok((p, pe, step + 1));
            }
        }
    }
    Err(QueueError::SeriesCap(MAX_MIXTURE_TERMS))
}

/// `P̂(1) = ∫ e^{Qx} dH(x)`.
fn laplace_total(b: &Bmap, service: &ServiceDist) -> Result<DMatrix<f64>, QueueError> {
    let n = b.phases();
    let q = b.generator();
    let eye = DMatrix::<f64>::identity(n, n);
    let resolvent = |mu: f64| -> Result<DMatrix<f64>, QueueError> {
        Ok((&eye * mu - &q).try_inverse().ok_or_else(|| QueueError::InvalidArgument("μI − Q is singular".into()))? * mu)
    };
    match service {
        ServiceDist::Exponential { rate } => resolvent(*rate),
        ServiceDist::Erlang { shape, rate } => {
            let one = resolvent(*rate)?;
            Ok((1..*shape).fold(one.clone(), |acc, _| acc * &one))
        }
        _ => {
            let theta = 1.05 * b.theta().max(q.diagonal().abs().max());
            let step = &eye + &q / theta;
            let ev = b.e_varpi();
            let mut pow = eye.clone();
            let mut acc = DMatrix::<f64>::zeros(n, n);
            for k in 0..MAX_MIXTURE_TERMS {
                acc += &pow * service.mixture_weight(k, theta)?;
                let tail = service.mixture_tail(k, theta)?;
                if tail * (&pow - &ev).abs().max() < TOTAL_SERIES_TOL {
                    return Ok(acc + &ev * tail);
                }
                pow = &pow * &step;
            }
            Err(QueueError::SeriesCap(MAX_MIXTURE_TERMS))
        }
    }
}

/// Sequence on `0..blocks` with the exact total and first moment as
/// aggregate tail.
fn assemble(
    flat: &[f64],
    n: usize,
    blocks: usize,
    total: &DMatrix<f64>,
    first_e: Option<DVector<f64>>,
) -> Result<MatrixSeq, QueueError> {
    let sz = n * n;
    let head: Vec<DMatrix<f64>> = (0..blocks).map(|k| from_flat(&flat[k * sz..(k + 1) * sz], n)).collect();
    let mut mass = total.clone();
    let mut moment = DVector::<f64>::zeros(n);
    for (k, blk) in head.iter().enumerate() {
        mass -= blk;
        moment += blk * ones(n) * k as f64;
    }
    mass.iter_mut().for_each(|v| *v = v.max(0.0));
    let top = (blocks - 1) as f64;
    let excess = first_e.map(|f| {
        let mut x = f - moment - &mass * ones(n) * top;
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        x
    });
    Ok(MatrixSeq::with_aggregate_tail(0, head, mass, excess)?)
}

/// Outcome of the kernel identity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `sup_k ‖P̄(k)e − h (Pₑ ∗ D̄)(k) e‖_∞`.
    pub residual: f64,
    /// Level attaining the supremum.
    pub worst_level: usize,
    /// Levels checked, `0..=levels`.
    pub levels: usize,
    /// Bound applied.
    pub bound: f64,
}

/// Residual of `P̄(k)e = h Σ_{l≤k} Pₑ(l) D̄(k − l) e` over the explicit range.
pub fn check_pe_identity(m: &QueueModel, k: &Kernels) -> Result<IdentityReport, QueueError> {
    let n = m.bmap().phases();
    let d = m.bmap().d();
    let h = m.service().mean();
    let dbar: Vec<DVector<f64>> = (0..=k.levels as i64).map(|j| d.overline_e(j)).collect::<Result<_, _>>()?;
    let pe: Vec<DMatrix<f64>> = (0..=k.levels as i64).map(|l| k.pe.at(l)).collect::<Result<_, _>>()?;
    let (mut residual, mut worst_level) = (0.0f64, 0usize);
    for lvl in 0..=k.levels {
        let mut rhs = DVector::<f64>::zeros(n);
        for l in 0..=lvl {
            rhs.gemv(h, &pe[l], &dbar[lvl - l], 1.0);
        }
        let r = (k.p.overline_e(lvl as i64)? - rhs).abs().max();
        if r > residual {
            residual = r;
            worst_level = lvl;
        }
    }
    if residual > IDENTITY_TOL {
        return Err(QueueError::IdentityResidual { residual, level: worst_level, bound: IDENTITY_TOL });
    }
    Ok(IdentityReport { residual, worst_level, levels: k.levels, bound: IDENTITY_TOL })
}

/// `max_i [P̄ₑ(k) e]_i / P(G_de > k)` on `levels`.
pub fn pe_tail_ratios(k: &Kernels, g_de: &DiscreteDist, levels: &[usize]) -> Result<Vec<(usize, f64)>, QueueError> {
    levels.iter().map(|&l| Ok((l, k.pe.overline_e(l as i64)?.max() / g_de.tail(l as i64)))).collect()
}

/// M/G/1-type chain with `A(k) = P(k + 1)`, `B(k) = P(k)` and `B(−1) = P(0)`.
pub fn embed_mg1(k: &Kernels) -> Result<Gig1Chain, QueueError> {
    if k.levels < 2 {
        return Err(QueueError::InvalidArgument("at least two kernel levels are required".into()));
    }
    let (mass, excess) = match k.p.tail() {
        SeqTail::Aggregate { mass, excess } => (mass.clone(), excess.clone()),
        _ => unreachable!("kernels carry aggregate tails"),
    };
    let head = k.p.head().to_vec();
    let p0 = head[0].clone();
    let a = MatrixSeq::with_aggregate_tail(-1, head.clone(), mass.clone(), excess.clone())?;
    let b_up = MatrixSeq::with_aggregate_tail(1, head[1..].to_vec(), mass, excess)?;
    Ok(Gig1Chain::new(p0.clone(), b_up, vec![p0], a)?)
}

/// Time-stationary queue length of `m` on levels `0..levels`.
#[derive(Debug, Clone)]
pub struct QueueStationary {
    /// Kernels used.
    pub kernels: Kernels,
    /// Embedded chain.
    pub chain: Gig1Chain,
    /// `y(k)`, with `x0 = y(0)`.
    pub sol: StationarySolution,
}

/// Kernels, embedding and stationary solve.
pub fn queue_stationary(m: &QueueModel, levels: usize) -> Result<QueueStationary, QueueError> {
    let kernels = kernels(m, (levels + 1).max(MIN_KERNEL_LEVELS))?;
    let chain = embed_mg1(&kernels)?;
    let sol = stationary(&chain, levels)?;
    Ok(QueueStationary { kernels, chain, sol })
}

/// Asymptotic regime and its inputs. `None` inputs are derived from a
/// rank-one batch tail when possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Regime {
    /// Light-tailed service; batches drive the tail.
    LightBatch {
        /// `d̃_G = lim D̿(k)e / P(G_de > k)`.
        d_g: Option<Vec<f64>>,
    },
    /// Second-order long-tailed service dominates.
    ServiceDominant,
    /// Consistently varying service with `D̿(k)e ~ d̃_H H̄ₑ(k/λ)`.
    ConsistentVariation {
        /// `d̃_H`.
        d_h: Option<Vec<f64>>,
    },
    /// `H̄ₑ(k/λ) = o(P(G_de > k))`.
    Mixed {
        /// `d̃_G`.
        d_g: Option<Vec<f64>>,
    },
}

/// `d̃_G = λ v / (ϖ v)` for a rank-one batch tail `v wᵀ P(T = k)`.
pub fn batch_limit_from_tail(b: &Bmap) -> Option<DVector<f64>> {
    match b.d().tail() {
        SeqTail::RankOne { v, .. } => {
            let s = (b.varpi() * v)[0];
            (s > 0.0).then(|| v * (b.lambda() / s))
        }
        _ => None,
    }
}

fn batch_limit(m: &QueueModel, given: &Option<Vec<f64>>) -> Result<DVector<f64>, QueueError> {
    let b = m.bmap();
    let d_g = match given {
        Some(v) => {
            if v.len() != b.phases() {
                return Err(QueueError::InconsistentInput(format!(
                    "d_G has length {}, expected {}",
                    v.len(),
                    b.phases()
                )));
            }
            DVector::from_column_slice(v)
        }
        None => batch_limit_from_tail(b)
            .ok_or_else(|| QueueError::MissingInput("d_G is required when D has no rank-one tail".into()))?,
    };
    let lhs = (b.varpi() * &d_g)[0];
    if (lhs / b.lambda() - 1.0).abs() > BATCH_LIMIT_TOL {
        return Err(QueueError::InconsistentInput(format!("ϖ d_G = {lhs} differs from λ = {}", b.lambda())));
    }
    Ok(d_g)
}

/// Prefactor and reference tail of `ȳ(k)` in the chosen regime.
pub fn queue_tail_asymptote(m: &QueueModel, regime: &Regime) -> Result<TailPrediction, QueueError> {
    let b = m.bmap();
    let rho = m.rho();
    let base = rho / (1.0 - rho);
    let service_ref = || ReferenceTail::ScaledEquilibrium { service: m.service().clone(), rate: b.lambda() };
    let (factor, reference) = match regime {
        Regime::LightBatch { d_g } | Regime::Mixed { d_g } => {
            if matches!(regime, Regime::LightBatch { .. }) && !m.service().is_light_tailed() {
                log::warn!("light-batch regime selected with heavy-tailed service");
            }
            batch_limit(m, d_g)?;
            let (_, g_de) = batch_distributions(b)?;
            (base, ReferenceTail::Discrete(g_de))
        }
        Regime::ServiceDominant => {
            if m.service().is_light_tailed() {
                log::warn!("service-dominant regime selected with light-tailed service");
            }
            (base, service_ref())
        }
        Regime::ConsistentVariation { d_h } => {
            let d_h = d_h.as_ref().ok_or_else(|| QueueError::MissingInput("d_H".into()))?;
            if d_h.len() != b.phases() {
                return Err(QueueError::InconsistentInput(format!("d_H has length {}", d_h.len())));
            }
            let wd = (b.varpi() * DVector::from_column_slice(d_h))[0];
            ((rho + m.service().mean() * wd) / (1.0 - rho), service_ref())
        }
    };
    Ok(TailPrediction { prefactor: (b.varpi() * factor).iter().copied().collect(), reference })
}

/// `ϖc / (1 − ρ) · ϖ` for `P̿(k)e ~ c P(Y > k)`.
pub fn kernel_tail_prefactor(m: &QueueModel, c: &DVector<f64>) -> RowDVector<f64> {
    let w = m.bmap().varpi();
    w * ((w * c)[0] / (1.0 - m.rho()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm1(lambda: f64, mu: f64) -> QueueModel {
        QueueModel::new(Bmap::poisson(lambda).unwrap(), ServiceDist::Exponential { rate: mu }).unwrap()
    }

    #[test]
    fn poisson_uniformizes_to_unit_step() {
        let b = Bmap::poisson(0.7).unwrap();
        let l = uniformize(&b).unwrap();
        assert_eq!(b.theta(), 0.7);
        assert_eq!(l.at(0).unwrap()[(0, 0)], 0.0);
        assert!((l.at(1).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_kernel_is_geometric() {
        let (lambda, mu) = (0.5, 1.0);
        let k = kernels(&mm1(lambda, mu), 40).unwrap();
        let q = lambda / (lambda + mu);
        for l in 0..=40 {
            let exact = (1.0 - q) * q.powi(l);
            assert!((k.p.at(l as i64).unwrap()[(0, 0)] - exact).abs() < 1e-15);
        }
        assert!((k.p.overline_e(40).unwrap()[0] - q.powi(41)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_kernel_is_poisson() {
        let m = QueueModel::new(Bmap::poisson(0.6).unwrap(), ServiceDist::Deterministic { value: 1.5 }).unwrap();
        let k = kernels(&m, 30).unwrap();
        let mean: f64 = 0.9;
        let mut pmf = (-mean).exp();
        for l in 0..=30 {
            assert!((k.p.at(l).unwrap()[(0, 0)] - pmf).abs() < 1e-15, "level {l}");
            pmf *= mean / (l + 1) as f64;
        }
    }

    #[test]
    fn missing_inputs_are_reported() {
        let m = mm1(0.5, 1.0);
        assert!(matches!(
            queue_tail_asymptote(&m, &Regime::ConsistentVariation { d_h: None }),
            Err(QueueError::MissingInput(_))
        ));
        assert!(matches!(
            queue_tail_asymptote(&m, &Regime::LightBatch { d_g: None }),
            Err(QueueError::MissingInput(_))
        ));
    }
}
