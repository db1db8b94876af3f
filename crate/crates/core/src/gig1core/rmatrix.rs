//! Rate matrices `R(k)` and `R₀(k)`.

use nalgebra::{DMatrix, DVector};

use super::{ChainError, FirstPassageBundle, Gig1Chain};
use crate::blockseq::MatrixSeq;
use crate::numeric::linalg::spectral_radius_nonneg;

/// `R(k)` and `R₀(k)` for `1 ≤ k ≤ K` with exact totals.
#[derive(Debug, Clone)]
pub struct RMatrices {
    /// `{R(k); k ≥ 1}`; the tail beyond `K` is an exact aggregate.
    pub r: MatrixSeq,
    /// `{R₀(k); k ≥ 1}`; same convention.
    pub r0: MatrixSeq,
    /// `(I − Φ(0))^{−1}`.
    pub i_minus_phi_inv: DMatrix<f64>,
    /// Spectral radius of `R = Σ_k R(k)`.
    pub spectral_radius: f64,
}

/// `[S(k) + Σ_{m≥1} S(k+m) L(m)]` for `k = 1..=levels` together with its total
/// over all `k ≥ 1`, for `S = A` or `S = B`.
///
/// The sum over `m` is split as `S̄(k) L_∞ + Σ_{m ≤ W} S(k+m)(L(m) − L_∞)`,
/// with `L_∞ = e ψ̂` the renewal limit of `L`. Terms beyond the horizon of an
/// aggregate tail are dropped; they carry only `L(m) − L_∞`.
fn censored_blocks(
    s: &MatrixSeq,
    fp: &FirstPassageBundle,
    levels: usize,
) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>), ChainError> {
    let reach = s.horizon();
    let w = (fp.l_levels() as i64).min(reach.max(0)) as usize;
    let diffs: Vec<DMatrix<f64>> = fp.l[..w].iter().map(|l| l - &fp.l_limit).collect();
    let top = (levels as i64).saturating_add(w as i64).min(reach);
    let blocks: Vec<DMatrix<f64>> = (1..=top).map(|k| s.at(k)).collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(levels);
    for k in 1..=levels {
        let mut u = &blocks[k - 1] + s.overline(k as i64)? * &fp.l_limit;
        for (mi, d) in diffs.iter().enumerate().take(blocks.len().saturating_sub(k)) {
            u.gemm(1.0, &blocks[k + mi], d, 1.0);
        }
        u.iter_mut().for_each(|v| *v = v.max(0.0));
        out.push(u);
    }
    let double = s.double_overline_e(0)?;
    let mut total = s.overline(0)? + double * &fp.psi_hat;
    for (mi, d) in diffs.iter().enumerate() {
        total.gemm(1.0, &s.overline(mi as i64 + 1)?, d, 1.0);
    }
    Ok((out, total))
}

fn with_exact_total(head: Vec<DMatrix<f64>>, total: DMatrix<f64>) -> Result<MatrixSeq, ChainError> {
    let explicit = head.iter().fold(DMatrix::zeros(total.nrows(), total.ncols()), |s, m| s + m);
    let mut mass = total - explicit;
    mass.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(MatrixSeq::with_aggregate_tail(1, head, mass, None::<DVector<f64>>)?)
}

/// Computes `R(k)` and `R₀(k)` for `1 ≤ k ≤ levels`.
///
/// `levels` is reduced to the horizon of aggregate `A` or `B` tails.
pub fn r_matrices(c: &Gig1Chain, fp: &FirstPassageBundle, levels: usize) -> Result<RMatrices, ChainError> {
    let m = c.m();
    let reach = c.a().horizon().min(c.b_up().horizon());
    let levels = (levels as i64).min(reach).max(1) as usize;
    let eye = DMatrix::<f64>::identity(m, m);
    let inv = (&eye - &fp.phi0).try_inverse().ok_or_else(|| ChainError::Singular("I − Φ(0)".into()))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(ChainError::Singular("I − Φ(0)".into()));
    }
    let (ua, ua_total) = censored_blocks(c.a(), fp, levels)?;
    let (ub, ub_total) = censored_blocks(c.b_up(), fp, levels)?;
    let scale = |v: Vec<DMatrix<f64>>| -> Vec<DMatrix<f64>> {
        v.into_iter()
            .map(|u| {
                let mut x = u * &inv;
                x.iter_mut().for_each(|v| *v = v.max(0.0));
                x
            })
            .collect()
    };
    let r = with_exact_total(scale(ua), ua_total * &inv)?;
    let r0 = with_exact_total(scale(ub), ub_total * &inv)?;
    let spectral_radius = spectral_radius_nonneg(r.total());
    if spectral_radius >= 1.0 {
        return Err(ChainError::Singular(format!("I − R (spectral radius {spectral_radius})")));
    }
    Ok(RMatrices { r, r0, i_minus_phi_inv: inv, spectral_radius })
}
