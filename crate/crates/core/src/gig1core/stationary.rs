//! Boundary vector, stationary recursion and structural constants.

use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use super::{
    first_passage, r_matrices, truncated_solve, ChainError, FirstPassageBundle, FirstPassageOptions, Gig1Chain,
    RMatrices, ValidationReport,
};
use crate::numeric::linalg::{ones, single_class_stationary};

/// Tolerance on the two drift computations in [`structural_constants`].
pub const DRIFT_TOL: f64 = 1e-6;

/// Which solver produced a [`StationarySolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    /// R-matrix recursion with exact tail totals.
    MatrixAnalytic,
    /// Block elimination on a finite truncation.
    TruncatedSolve,
}

/// Stationary distribution on levels `0..=K` with tail sums.
#[derive(Debug, Clone)]
pub struct StationarySolution {
    /// `x(0)`, length `M0`.
    pub x0: RowDVector<f64>,
    /// `x(1), …, x(K)`.
    pub x: Vec<RowDVector<f64>>,
    /// `x̄(k) = Σ_{l>k} x(l)` for `k = 0..=K`.
    pub tail: Vec<RowDVector<f64>>,
    /// Mass beyond level `K`, `x̄(K) e`.
    pub deficit: f64,
    /// Producing solver.
    pub method: Method,
}

impl StationarySolution {
    /// Last level stored explicitly.
    pub fn levels(&self) -> usize {
        self.x.len()
    }

    /// `x(k)`, or `None` beyond the stored range.
    pub fn level(&self, k: usize) -> Option<&RowDVector<f64>> {
        if k == 0 {
            Some(&self.x0)
        } else {
            self.x.get(k - 1)
        }
    }

    /// `x(k) e`.
    pub fn level_mass(&self, k: usize) -> f64 {
        if k == 0 {
            self.x0.sum()
        } else {
            self.x.get(k - 1).map_or(0.0, |v| v.sum())
        }
    }

    /// `x̄(k) e`; zero beyond the stored range.
    pub fn tail_mass(&self, k: usize) -> f64 {
        self.tail.get(k).map_or(0.0, |v| v.sum())
    }

    /// Total variation distance, lumping everything above the common range.
    pub fn total_variation(&self, other: &StationarySolution) -> f64 {
        let k = self.levels().min(other.levels());
        let mut s = (&self.x0 - &other.x0).abs().sum();
        for l in 0..k {
            s += (&self.x[l] - &other.x[l]).abs().sum();
        }
        s += (self.tail_mass(k) - other.tail_mass(k)).abs();
        0.5 * s
    }
}

/// Consistency checks on the first-passage quantities.
#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    /// `π Σ k A(k) e`.
    pub sigma_direct: f64,
    /// `−π (I − R)(I − Φ(0)) Σ k G(k) e`.
    pub sigma_first_passage: f64,
    /// `π (I − R)(I − Φ(0)) / (−σ)`.
    pub psi: Vec<f64>,
    /// `‖ψ − ψ̂‖_∞` against the renewal limit of the ladder process.
    pub psi_renewal_gap: f64,
    /// Detected period used for the `L` averages.
    pub tau: usize,
    /// The period is found from the support graph only.
    pub period_heuristic: bool,
    /// `(n, ‖Σ_{l<τ} L(nτ + l) − τ e ψ‖_∞)`.
    pub l_convergence: Vec<(usize, f64)>,
}

/// Everything computed on the way to a stationary solution.
#[derive(Debug, Clone)]
pub struct Solved {
    /// Validation outcome.
    pub report: ValidationReport,
    /// First-passage bundle.
    pub fp: FirstPassageBundle,
    /// Rate matrices.
    pub rm: RMatrices,
    /// The solution.
    pub sol: StationarySolution,
}

fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// `out += v · mat` for a row-major `mat` with `out.len()` columns.
#[inline]
fn add_vec_mat(out: &mut [f64], v: &[f64], mat: &[f64]) {
    let n = out.len();
    for (i, vi) in v.iter().enumerate() {
        if *vi == 0.0 {
            continue;
        }
        let row = &mat[i * n..(i + 1) * n];
        for (o, r) in out.iter_mut().zip(row) {
            *o += vi * r;
        }
    }
}

/// `x(0)` up to normalization, by censoring on level 0.
pub fn boundary_vector(c: &Gig1Chain, rm: &RMatrices) -> Result<RowDVector<f64>, ChainError> {
    let b = c.b_max();
    let mut w: Vec<DMatrix<f64>> = Vec::with_capacity(b);
    for k in 1..=b as i64 {
        let mut acc = rm.r0.at(k)?;
        for l in 1..k {
            acc += &w[l as usize - 1] * rm.r.at(k - l)?;
        }
        w.push(acc);
    }
    let mut k0 = c.b0().clone();
    for (k, wk) in w.iter().enumerate() {
        k0 += wk * c.b_down(k + 1);
    }
    single_class_stationary(&k0).ok_or_else(|| ChainError::Singular("censored level-0 matrix".into()))
}

/// `x(0)` from truncated solves of growing size, stopping once the
/// normalized vector changes by less than `1e-10` in ℓ₁.
pub fn boundary_vector_windowed(
    c: &Gig1Chain,
    start: usize,
    max_levels: usize,
) -> Result<(RowDVector<f64>, usize), ChainError> {
    let mut n = start.max(c.b_max() + 2);
    let mut prev: Option<RowDVector<f64>> = None;
    loop {
        let sol = truncated_solve(c, n)?;
        let x0 = &sol.x0 / sol.x0.sum();
        if let Some(p) = &prev {
            let change = (&x0 - p).abs().sum();
            if change < 1e-10 {
                return Ok((x0, n));
            }
            if n * 2 > max_levels {
                return Err(ChainError::NotConverged { what: "windowed boundary vector".into(), residual: change });
            }
        }
        prev = Some(x0);
        n *= 2;
    }
}

/// Stationary distribution on levels `0..=levels` with default options.
pub fn stationary(c: &Gig1Chain, levels: usize) -> Result<StationarySolution, ChainError> {
    Ok(stationary_with(c, levels, &FirstPassageOptions::default())?.sol)
}

/// Validates the chain, computes `G`, `Φ(0)`, `L`, `R`, `R₀` and the
/// stationary vector on levels `0..=levels`.
pub fn stationary_with(c: &Gig1Chain, levels: usize, opts: &FirstPassageOptions) -> Result<Solved, ChainError> {
    if levels == 0 {
        return Err(ChainError::InvalidArgument("at least one level is required".into()));
    }
    let report = c.validate()?;
    let fp = first_passage(c, opts)?;
    let rm = r_matrices(c, &fp, levels)?;
    let sol = solve_levels(c, &rm, levels)?;
    Ok(Solved { report, fp, rm, sol })
}

fn solve_levels(c: &Gig1Chain, rm: &RMatrices, levels: usize) -> Result<StationarySolution, ChainError> {
    let m = c.m();
    let k_max = (levels as i64).min(rm.r.k_max()).min(rm.r0.k_max()) as usize;
    let x0 = boundary_vector(c, rm)?;
    let r: Vec<Vec<f64>> = (1..=k_max as i64).map(|k| rm.r.at(k).map(|b| flat(&b))).collect::<Result<_, _>>()?;
    let r_bar: Vec<Vec<f64>> =
        (0..=k_max as i64).map(|k| rm.r.overline(k).map(|b| flat(&b))).collect::<Result<_, _>>()?;
    let x0s: Vec<f64> = x0.iter().copied().collect();

    let mut x = vec![0.0; k_max * m];
    for k in 1..=k_max {
        let mut acc = vec![0.0; m];
        add_vec_mat(&mut acc, &x0s, &flat(&rm.r0.at(k as i64)?));
        for l in 1..k {
            add_vec_mat(&mut acc, &x[(l - 1) * m..l * m], &r[k - l - 1]);
        }
        x[(k - 1) * m..k * m].copy_from_slice(&acc);
    }

    let eye = DMatrix::<f64>::identity(m, m);
    let inv = (&eye - rm.r.total()).try_inverse().ok_or_else(|| ChainError::Singular("I − R".into()))?;
    let inv = flat(&inv);
    let mut tail = vec![0.0; (k_max + 1) * m];
    for k in 0..=k_max {
        let mut acc = vec![0.0; m];
        add_vec_mat(&mut acc, &x0s, &flat(&rm.r0.overline(k as i64)?));
        for l in 1..=k {
            add_vec_mat(&mut acc, &x[(l - 1) * m..l * m], &r_bar[k - l]);
        }
        let dst = &mut tail[k * m..(k + 1) * m];
        dst.iter_mut().for_each(|v| *v = 0.0);
        add_vec_mat(dst, &acc, &inv);
        dst.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    let total = x0.sum() + tail[..m].iter().sum::<f64>();
    if !(total > 0.0 && total.is_finite()) {
        return Err(ChainError::Singular(format!("normalization constant {total}")));
    }
    let rows = |buf: &[f64], n: usize| -> Vec<RowDVector<f64>> {
        (0..n).map(|i| RowDVector::from_iterator(m, buf[i * m..(i + 1) * m].iter().map(|v| v / total))).collect()
    };
    let x = rows(&x, k_max);
    let tail = rows(&tail, k_max + 1);
    let deficit = tail[k_max].sum();
    Ok(StationarySolution { x0: x0 / total, x, tail, deficit, method: Method::MatrixAnalytic })
}

/// Drift via first passage, the vector `ψ` and the convergence of period
/// averages of `L` towards `τ e ψ`.
pub fn structural_constants(
    c: &Gig1Chain,
    report: &ValidationReport,
    fp: &FirstPassageBundle,
    rm: &RMatrices,
) -> Result<StructuralReport, ChainError> {
    let m = c.m();
    let pi = report.pi_row();
    let eye = DMatrix::<f64>::identity(m, m);
    let weight = &pi * (&eye - rm.r.total()) * (&eye - &fp.phi0);
    let mut kg = DMatrix::<f64>::zeros(m, m);
    for (i, g) in fp.g.iter().enumerate() {
        kg += g * (i + 1) as f64;
    }
    let sigma_first_passage = -(&weight * kg * ones(m))[0];
    let sigma_direct = report.sigma;
    if (sigma_direct - sigma_first_passage).abs() > DRIFT_TOL {
        return Err(ChainError::DriftMismatch { direct: sigma_direct, via_first_passage: sigma_first_passage });
    }
    let psi = &weight / (-sigma_direct);
    let tau = fp.tau.max(1);
    let target = ones(m) * &psi * tau as f64;
    let mut l_convergence = Vec::new();
    let mut n = 1;
    while (n + 1) * tau <= fp.l_levels() {
        let mut s = DMatrix::<f64>::zeros(m, m);
        for l in 0..tau {
            s += fp.l_at(n * tau + l);
        }
        let err = (s - &target).abs().max();
        l_convergence.push((n, err));
        n = if n < 8 { n + 1 } else { n * 2 };
    }
    let psi_renewal_gap = (&psi - &fp.psi_hat).abs().max();
    Ok(StructuralReport {
        sigma_direct,
        sigma_first_passage,
        psi: psi.iter().copied().collect(),
        psi_renewal_gap,
        tau,
        period_heuristic: true,
        l_convergence,
    })
}
