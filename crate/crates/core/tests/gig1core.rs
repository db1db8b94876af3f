use gigtail::blockseq::MatrixSeq;
use gigtail::gig1core::{
    first_passage, stationary, stationary_with, structural_constants, truncated_solve, FirstPassageOptions, Gig1Chain,
};
use gigtail::heavytail::DiscreteDist;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn birth_death(p: f64, q: f64) -> Gig1Chain {
    let a = MatrixSeq::scalar(-1, &[q, 1.0 - p - q, p]).unwrap();
    let b_up = MatrixSeq::scalar(1, &[p]).unwrap();
    Gig1Chain::new(DMatrix::from_element(1, 1, 1.0 - p), b_up, vec![DMatrix::from_element(1, 1, q)], a).unwrap()
}

/// Two phases, jumps down by up to two levels and a zeta-tailed rank-one
/// upward component.
fn heavy_two_phase(alpha: f64) -> Gig1Chain {
    let m = |v: [f64; 4]| DMatrix::from_row_slice(2, 2, &v);
    let head = vec![
        m([0.20, 0.05, 0.10, 0.15]),
        m([0.20, 0.10, 0.05, 0.20]),
        m([0.10, 0.05, 0.05, 0.10]),
        m([0.05, 0.05, 0.10, 0.05]),
    ];
    let used: Vec<f64> = (0..2).map(|i| head.iter().map(|b| b.row(i).sum()).sum()).collect();
    let v = DVector::from_vec(vec![1.0 - used[0], 1.0 - used[1]]);
    let w = DVector::from_vec(vec![0.5, 0.5]);
    let dist = DiscreteDist::zeta_pareto_shifted(alpha, 2).unwrap();
    let a = MatrixSeq::with_rank_one_tail(-2, head.clone(), v.clone(), w.clone(), dist.clone()).unwrap();
    let d1 = &head[0] + &head[1];
    let d2 = head[0].clone();
    let b_up = MatrixSeq::with_rank_one_tail(1, vec![head[3].clone()], v, w, dist).unwrap();
    let b0 = DMatrix::from_diagonal(&(DVector::repeat(2, 1.0) - b_up.total() * DVector::repeat(2, 1.0)));
    Gig1Chain::new(b0, b_up, vec![d1, d2], a).unwrap()
}

#[test]
fn birth_death_is_geometric() {
    let (p, q) = (0.2, 0.5);
    let sol = stationary(&birth_death(p, q), 60).unwrap();
    let rho: f64 = p / q;
    for k in 1..=60 {
        let exact = (1.0 - rho) * rho.powi(k as i32);
        assert!((sol.level_mass(k) - exact).abs() < 1e-13, "k={k}");
        let tail = rho.powi(k as i32 + 1);
        assert!((sol.tail_mass(k) - tail).abs() <= 1e-12 * tail.max(1e-3), "tail k={k}");
    }
    assert!((sol.x0[0] - (1.0 - rho)).abs() < 1e-13);
}

/// First passage below the starting level by an absorbing linear solve on a
/// strip of `height` levels, the top one lumping everything above.
fn first_passage_oracle(c: &Gig1Chain, height: usize) -> Vec<DMatrix<f64>> {
    let m = c.m();
    let b = c.b_max();
    let n = height * m;
    let mut t = DMatrix::<f64>::zeros(n, n);
    let mut r = DMatrix::<f64>::zeros(n, b * m);
    for i in 0..height {
        for j in 0..height {
            let k = j as i64 - i as i64;
            let blk = if j == height - 1 { c.a().overline(k - 1).unwrap() } else { c.a().at(k).unwrap() };
            t.view_mut((i * m, j * m), (m, m)).copy_from(&blk);
        }
        for d in 1..=b {
            let k = -(i as i64) - d as i64;
            if k >= -(b as i64) {
                r.view_mut((i * m, (d - 1) * m), (m, m)).copy_from(&c.a().at(k).unwrap());
            }
        }
    }
    let lu = (DMatrix::identity(n, n) - t).lu();
    let h = lu.solve(&r).unwrap();
    (1..=b).map(|d| h.view((0, (d - 1) * m), (m, m)).clone_owned()).collect()
}

#[test]
fn first_passage_matches_absorbing_oracle() {
    let c = heavy_two_phase(4.5);
    let fp = first_passage(&c, &FirstPassageOptions::default()).unwrap();
    let oracle = first_passage_oracle(&c, 1500);
    for d in 1..=2 {
        let diff = (fp.g_at(d) - &oracle[d - 1]).abs().max();
        assert!(diff < 1e-9, "G({d}) differs by {diff}");
    }
}

#[test]
fn matrix_analytic_matches_truncated_solve() {
    let c = heavy_two_phase(4.5);
    let ma = stationary(&c, 400).unwrap();
    let tr = truncated_solve(&c, 6000).unwrap();
    let tv = ma.total_variation(&tr);
    assert!(tv < 1e-6, "total variation {tv}");
    assert!((ma.x0.sum() + ma.tail_mass(0) - 1.0).abs() < 1e-12);
}

#[test]
fn drift_identity_and_l_limit() {
    let c = heavy_two_phase(4.5);
    let solved = stationary_with(&c, 100, &FirstPassageOptions::default()).unwrap();
    let s = structural_constants(&c, &solved.report, &solved.fp, &solved.rm).unwrap();
    assert!((s.sigma_direct - s.sigma_first_passage).abs() < 1e-9);
    assert!(s.psi_renewal_gap < 1e-8, "ψ gap {}", s.psi_renewal_gap);
    let last = s.l_convergence.last().unwrap().1;
    assert!(last < 1e-8, "L average error {last}");
}

fn random_chain(weights: &[f64], b: usize) -> Option<Gig1Chain> {
    let m = 2;
    let span = b + 3;
    let mut blocks = vec![DMatrix::<f64>::zeros(m, m); span];
    for i in 0..m {
        let row = &weights[i * span * m..(i + 1) * span * m];
        let s: f64 = row.iter().sum();
        for k in 0..span {
            for j in 0..m {
                blocks[k][(i, j)] = row[k * m + j] / s;
            }
        }
    }
    let a = MatrixSeq::finite(-(b as i64), blocks.clone()).ok()?;
    let b_up = MatrixSeq::finite(1, blocks[b + 1..].to_vec()).ok()?;
    let b_down: Vec<DMatrix<f64>> = (1..=b).map(|d| a.total() - a.overline(-(d as i64)).unwrap()).collect();
    let b0 = blocks[..=b].iter().fold(DMatrix::zeros(m, m), |s, x| s + x);
    let c = Gig1Chain::new(b0, b_up, b_down, a).ok()?;
    c.validate().ok()?;
    Some(c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn stationary_solvers_agree(weights in prop::collection::vec(0.05f64..1.0, 2 * 5 * 2), b in 1usize..=2) {
        let mut w = weights.clone();
        w.truncate(2 * (b + 3) * 2);
        for i in 0..2 {
            for j in 0..2 {
                w[i * (b + 3) * 2 + j] += 1.5;
            }
        }
        if let Some(c) = random_chain(&w, b) {
            let ma = stationary(&c, 150).unwrap();
            let tr = truncated_solve(&c, 2000).unwrap();
            let tv = ma.total_variation(&tr);
            prop_assert!(tv < 1e-9, "total variation {}", tv);
            let mass: f64 = ma.x0.sum() + ma.tail_mass(0);
            prop_assert!((mass - 1.0).abs() < 1e-12);
            for k in 1..ma.levels() {
                prop_assert!(ma.level_mass(k) >= 0.0);
                prop_assert!((ma.tail_mass(k - 1) - ma.tail_mass(k) - ma.level_mass(k)).abs() < 1e-12);
            }
        }
    }
}
