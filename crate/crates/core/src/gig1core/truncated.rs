//! Stationary vector of a finite truncation by block elimination.
//!
//! Levels above `N` are lumped into level `N`. Levels are censored out from
//! the bottom; since jumps down are bounded by `b_max`, only the next
//! `b_max` block rows are modified at any step, so memory stays linear in `N`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, RowDVector};

use super::stationary::Method;
use super::{ChainError, Gig1Chain, StationarySolution};
use crate::numeric::linalg::single_class_stationary;

/// Back substitution renormalizes once a level mass exceeds this.
const RESCALE_AT: f64 = 1e100;

struct Layout {
    m0: usize,
    m: usize,
    n: usize,
}

impl Layout {
    fn off(&self, l: usize) -> usize {
        if l == 0 {
            0
        } else {
            self.m0 + (l - 1) * self.m
        }
    }

    fn dim(&self, l: usize) -> usize {
        if l == 0 {
            self.m0
        } else {
            self.m
        }
    }

    fn width(&self) -> usize {
        self.m0 + self.n * self.m
    }
}

fn put(row: &mut DMatrix<f64>, col: usize, blk: &DMatrix<f64>) {
    row.view_mut((0, col), blk.shape()).copy_from(blk);
}

/// Stationary distribution of the chain truncated at level `levels`, with
/// excursions above it lumped into the top level.
///
/// The returned solution stores levels `1..levels`; the mass of the lumped
/// top level is reported as the deficit.
pub fn truncated_solve(c: &Gig1Chain, levels: usize) -> Result<StationarySolution, ChainError> {
    let b = c.b_max();
    let n = levels;
    if n < b + 2 {
        return Err(ChainError::InvalidArgument(format!("truncation level {n} must be at least b_max + 2")));
    }
    let lay = Layout { m0: c.m0(), m: c.m(), n };
    let top = n as i64;
    let a = c.a_blocks(-(b as i64), top)?;
    let a_at = |k: i64| &a[(k + b as i64) as usize];
    let a_over: Vec<DMatrix<f64>> = (-1..=top).map(|k| c.a().overline(k)).collect::<Result<_, _>>()?;
    let a_over_at = |k: i64| &a_over[(k + 1) as usize];

    let original = |i: usize| -> Result<DMatrix<f64>, ChainError> {
        let mut row = DMatrix::zeros(lay.dim(i), lay.width());
        if i == 0 {
            put(&mut row, 0, c.b0());
            for l in 1..n {
                put(&mut row, lay.off(l), &c.b_up().at(l as i64)?);
            }
            put(&mut row, lay.off(n), &c.b_up().overline(top - 1)?);
            return Ok(row);
        }
        if i <= b {
            put(&mut row, 0, c.b_down(i));
        }
        let ii = i as i64;
        for l in (i.saturating_sub(b)).max(1)..n {
            put(&mut row, lay.off(l), a_at(l as i64 - ii));
        }
        put(&mut row, lay.off(n), a_over_at(top - 1 - ii));
        Ok(row)
    };

    let mut active: VecDeque<DMatrix<f64>> = VecDeque::with_capacity(b + 1);
    for i in 0..=b.min(n) {
        active.push_back(original(i)?);
    }
    let mut z_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut x_blocks: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(n);
    for lvl in 0..n {
        let row_n = active.pop_front().expect("active row");
        let (off, d) = (lay.off(lvl), lay.dim(lvl));
        let rest = lay.off(lvl + 1);
        let right = row_n.columns(rest, lay.width() - rest);
        let mut i_minus = -row_n.view((0, off), (d, d)).clone_owned();
        for r in 0..d {
            let out: f64 = right.row(r).sum() + (0..d).filter(|&s| s != r).map(|s| row_n[(r, off + s)]).sum::<f64>();
            i_minus[(r, r)] = out;
        }
        let z = i_minus.try_inverse().ok_or_else(|| ChainError::Singular(format!("level {lvl} in truncated solve")))?;
        let zu = &z * right;
        let mut xs = Vec::with_capacity(b);
        for row_i in active.iter_mut() {
            let xi = row_i.view((0, off), (row_i.nrows(), d)).clone_owned();
            let mut tgt = row_i.columns_mut(rest, lay.width() - rest);
            tgt.gemm(1.0, &xi, &zu, 1.0);
            xs.push(xi);
        }
        z_blocks.push(z);
        x_blocks.push(xs);
        let next = lvl + b + 1;
        if next <= n {
            active.push_back(original(next)?);
        }
    }
    let last = active.pop_front().expect("top row");
    let (off, d) = (lay.off(n), lay.dim(n));
    let block = last.view((0, off), (d, d)).clone_owned();
    let xn =
        single_class_stationary(&block).ok_or_else(|| ChainError::Singular("top level in truncated solve".into()))?;

    let mut x: Vec<RowDVector<f64>> = vec![RowDVector::zeros(0); n + 1];
    x[n] = xn;
    for lvl in (0..n).rev() {
        let mut acc = RowDVector::zeros(lay.dim(lvl));
        for (j, xi) in x_blocks[lvl].iter().enumerate() {
            acc += &x[lvl + 1 + j] * xi;
        }
        x[lvl] = acc * &z_blocks[lvl];
        let size = x[lvl].sum();
        if size > RESCALE_AT {
            x[lvl..].iter_mut().for_each(|v| *v /= size);
        }
    }
    let total: f64 = x.iter().map(|v| v.sum()).sum();
    x.iter_mut().for_each(|v| *v /= total);
    let mut tail = vec![RowDVector::zeros(lay.m); n];
    let mut acc = RowDVector::zeros(lay.m);
    for k in (0..n).rev() {
        acc += &x[k + 1];
        tail[k] = acc.clone();
    }
    let x0 = x[0].clone();
    let levels_x: Vec<RowDVector<f64>> = x[1..n].to_vec();
    let deficit = x[n].sum();
    Ok(StationarySolution { x0, x: levels_x, tail, deficit, method: Method::TruncatedSolve })
}
