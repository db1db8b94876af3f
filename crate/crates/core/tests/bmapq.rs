use gigtail::asymptotics::{log_grid, tail_ratio_report};
use gigtail::blockseq::MatrixSeq;
use gigtail::bmapq::*;
use gigtail::gig1core::{stationary, truncated_solve};
use gigtail::heavytail::{DiscreteDist, ServiceDist};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn two_phase_map() -> Bmap {
    let c = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.3, -1.0]);
    let d = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.2, 0.5]);
    Bmap::map(c, d).unwrap()
}

/// Two phases, batches of size 1 to 5.
fn batch_bmap() -> Bmap {
    let c = DMatrix::from_row_slice(2, 2, &[-3.0, 0.4, 0.6, -2.0]);
    let weights = [0.4, 0.25, 0.15, 0.12, 0.08];
    let head = weights.iter().map(|w| DMatrix::from_row_slice(2, 2, &[1.8 * w, 0.8 * w, 0.5 * w, 0.9 * w])).collect();
    Bmap::new(c, MatrixSeq::finite(1, head).unwrap()).unwrap()
}

fn random_bmap(rates: &[f64], batch: &[f64]) -> Bmap {
    let c = DMatrix::from_row_slice(
        2,
        2,
        &[-(rates[0] + rates[1] + rates[2]), rates[0], rates[3], -(rates[3] + rates[4] + rates[5])],
    );
    let s: f64 = batch.iter().sum();
    let head = batch
        .iter()
        .map(|w| {
            DMatrix::from_row_slice(2, 2, &[rates[1] * w / s, rates[2] * w / s, rates[4] * w / s, rates[5] * w / s])
        })
        .collect();
    Bmap::new(c, MatrixSeq::finite(1, head).unwrap()).unwrap()
}

fn with_rho(b: Bmap, rho: f64, make: impl Fn(f64) -> ServiceDist) -> QueueModel {
    let mean = rho / b.lambda();
    QueueModel::new(b, make(mean)).unwrap()
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

#[test]
fn exponential_kernels_agree_across_methods() {
    let b = two_phase_map();
    for s in [ServiceDist::Exponential { rate: 3.0 }, ServiceDist::Erlang { shape: 3, rate: 6.0 }] {
        let r = kernels_with(&b, &s, 40, KernelMethod::Resolvent).unwrap();
        let u = kernels_with(&b, &s, 40, KernelMethod::Uniformization).unwrap();
        for k in 0..=40 {
            assert!(max_diff(&r.p.at(k).unwrap(), &u.p.at(k).unwrap()) < 1e-12, "P({k}) for {s:?}");
            assert!(max_diff(&r.pe.at(k).unwrap(), &u.pe.at(k).unwrap()) < 1e-12, "Pe({k}) for {s:?}");
        }
        assert!(max_diff(&r.p_total, &u.p_total) < 1e-12);
        assert!(max_diff(&r.pe_total, &u.pe_total) < 1e-12);
    }
}

#[test]
fn mm1_kernel_is_geometric() {
    let (lambda, mu) = (0.6, 1.0);
    let m = QueueModel::new(Bmap::poisson(lambda).unwrap(), ServiceDist::Exponential { rate: mu }).unwrap();
    let k = kernels(&m, 60).unwrap();
    let q = lambda / (lambda + mu);
    for l in 0..=60 {
        let expect = (mu / (lambda + mu)) * q.powi(l);
        assert!((k.p.at(l as i64).unwrap()[(0, 0)] - expect).abs() < 1e-14);
    }
}

#[test]
fn deterministic_kernel_is_poisson() {
    let (lambda, d) = (0.8, 1.1);
    let m = QueueModel::new(Bmap::poisson(lambda).unwrap(), ServiceDist::Deterministic { value: d }).unwrap();
    let k = kernels(&m, 30).unwrap();
    let mut pmf = (-lambda * d).exp();
    for l in 0..=30 {
        assert!((k.p.at(l).unwrap()[(0, 0)] - pmf).abs() < 1e-14, "level {l}");
        pmf *= lambda * d / (l + 1) as f64;
    }
}

#[test]
fn kernel_mean_is_load() {
    let models = [
        with_rho(two_phase_map(), 0.7, |h| ServiceDist::Erlang { shape: 3, rate: 3.0 / h }),
        with_rho(batch_bmap(), 0.6, |h| ServiceDist::Deterministic { value: h }),
        with_rho(two_phase_map(), 0.5, |h| ServiceDist::pareto_with_mean(2.5, h).unwrap()),
    ];
    for m in &models {
        let k = kernels(m, 400).unwrap_or_else(|e| panic!("{:?}: {e}", m.service()));
        let w = m.bmap().varpi();
        let mean = (w * k.p.first_moment_e().unwrap())[0];
        assert!((mean - m.rho()).abs() < 1e-8, "mean {mean} rho {}", m.rho());
        let rows = &k.p_total * DVector::repeat(2, 1.0);
        assert!(rows.iter().all(|r| (r - 1.0).abs() < 1e-12));
        let fixed = w * &k.pe_total;
        assert!((fixed - w).abs().max() < 1e-10);
    }
}

#[test]
fn embedded_chain_drift_and_phase_law() {
    let m = with_rho(batch_bmap(), 0.6, |h| ServiceDist::Erlang { shape: 2, rate: 2.0 / h });
    let k = kernels(&m, 200).unwrap();
    let chain = embed_mg1(&k).unwrap();
    let report = chain.validate().unwrap();
    assert!((report.sigma - (m.rho() - 1.0)).abs() < 1e-8);
    let gap = (report.pi_row() - m.bmap().varpi()).abs().max();
    assert!(gap < 1e-10, "pi vs varpi {gap}");
}

#[test]
fn mm1_embedded_solve_is_geometric() {
    let m = QueueModel::new(Bmap::poisson(0.5).unwrap(), ServiceDist::Exponential { rate: 1.0 }).unwrap();
    let q = queue_stationary(&m, 60).unwrap();
    for k in 0..=50 {
        assert!((q.sol.level_mass(k) - 0.5 * 0.5f64.powi(k as i32)).abs() < 1e-12);
    }
}

#[test]
fn identity_holds_for_erlang_map() {
    let m = with_rho(two_phase_map(), 0.7, |h| ServiceDist::Erlang { shape: 3, rate: 3.0 / h });
    let k = kernels(&m, 200).unwrap();
    let r = check_pe_identity(&m, &k).unwrap();
    assert!(r.residual <= 1e-9);
    let mm1 = QueueModel::new(Bmap::poisson(0.5).unwrap(), ServiceDist::Exponential { rate: 1.0 }).unwrap();
    let k = kernels(&mm1, 100).unwrap();
    assert!(check_pe_identity(&mm1, &k).unwrap().residual <= 1e-12);
}

#[test]
fn single_arrivals_give_unit_batches() {
    let (g, g_de) = batch_distributions(&two_phase_map()).unwrap();
    assert_eq!(g.pmf(1), 1.0);
    assert_eq!(g_de.tail(0), 0.0);
}

#[test]
fn zero_d_h_matches_service_dominant() {
    let m = with_rho(two_phase_map(), 0.5, |h| ServiceDist::pareto_with_mean(2.5, h).unwrap());
    let a = queue_tail_asymptote(&m, &Regime::ServiceDominant).unwrap();
    let b = queue_tail_asymptote(&m, &Regime::ConsistentVariation { d_h: Some(vec![0.0, 0.0]) }).unwrap();
    for (x, y) in a.prefactor.iter().zip(&b.prefactor) {
        assert!((x - y).abs() < 1e-15);
    }
    assert!((a.scale() - m.rho() / (1.0 - m.rho())).abs() < 1e-12);
}

#[test]
fn missing_regime_inputs_are_rejected() {
    let m = with_rho(two_phase_map(), 0.5, |h| ServiceDist::pareto_with_mean(2.5, h).unwrap());
    assert!(matches!(
        queue_tail_asymptote(&m, &Regime::ConsistentVariation { d_h: None }),
        Err(QueueError::MissingInput(_))
    ));
    assert!(matches!(queue_tail_asymptote(&m, &Regime::LightBatch { d_g: None }), Err(QueueError::MissingInput(_))));
    assert!(matches!(
        queue_tail_asymptote(&m, &Regime::Mixed { d_g: Some(vec![1.0, 1.0]) }),
        Err(QueueError::InconsistentInput(_))
    ));
}

#[test]
fn unstable_models_are_rejected() {
    let b = Bmap::poisson(1.0).unwrap();
    assert!(matches!(QueueModel::new(b, ServiceDist::Exponential { rate: 0.9 }), Err(QueueError::Unstable { .. })));
}

/// M[X]/M/1 with zeta batches: one phase, rank-one tail, no stored head.
fn zeta_batch_queue(alpha: f64, rho: f64) -> QueueModel {
    let g = DiscreteDist::zeta_pareto(alpha).unwrap();
    let lambda_g = rho / g.mean().unwrap();
    let d =
        MatrixSeq::with_rank_one_tail(1, vec![], DVector::from_element(1, lambda_g), DVector::from_element(1, 1.0), g)
            .unwrap();
    let b = Bmap::new(DMatrix::from_element(1, 1, -lambda_g), d).unwrap();
    QueueModel::new(b, ServiceDist::Exponential { rate: 1.0 }).unwrap()
}

#[test]
fn light_service_residual_kernel_is_negligible() {
    let m = zeta_batch_queue(2.5, 0.5);
    let k = kernels(&m, 2000).unwrap();
    let (_, g_de) = batch_distributions(m.bmap()).unwrap();
    let ratios = pe_tail_ratios(&k, &g_de, &[100, 200, 400, 800, 1600]).unwrap();
    assert!(ratios.windows(2).all(|w| w[1].1 < w[0].1), "{ratios:?}");
    assert!(ratios.last().unwrap().1 < 0.5 * ratios[0].1);
}

#[test]
fn light_batch_prefactor_matches_truncated_solve() {
    let m = zeta_batch_queue(2.5, 0.5);
    let q = queue_stationary(&m, 3000).unwrap();
    let pred = queue_tail_asymptote(&m, &Regime::LightBatch { d_g: None }).unwrap();
    assert!((pred.scale() - 1.0).abs() < 1e-12);
    assert!((q.sol.tail_mass(0) - m.rho()).abs() < 1e-12);
    let coarse = truncated_solve(&q.chain, 1500).unwrap();
    let fine = truncated_solve(&q.chain, 3000).unwrap();
    for k in [10usize, 50, 100, 200] {
        let ma = q.sol.tail_mass(k);
        let (gap_coarse, gap_fine) = ((coarse.tail_mass(k) / ma - 1.0).abs(), (fine.tail_mass(k) / ma - 1.0).abs());
        assert!(gap_fine < 0.5 * gap_coarse, "k={k}: {gap_coarse} then {gap_fine}");
        assert!(gap_fine < 0.02, "k={k}: {gap_fine}");
    }
    let report = tail_ratio_report(&q.sol, &pred, &log_grid(500, 3000, 4), 0.2).unwrap();
    assert!(report.points.iter().all(|p| (p.ratio - 1.0).abs() < 0.1), "{report:?}");
}

#[test]
fn pareto_service_ratio_approaches_one() {
    let m = QueueModel::new(Bmap::poisson(0.4).unwrap(), ServiceDist::pareto_with_mean(2.5, 1.0).unwrap()).unwrap();
    let q = queue_stationary(&m, 2000).unwrap();
    let pred = queue_tail_asymptote(&m, &Regime::ServiceDominant).unwrap();
    let report = tail_ratio_report(&q.sol, &pred, &log_grid(250, 2000, 4), 0.2).unwrap();
    let dev: Vec<f64> = report.points.iter().map(|p| (p.ratio - 1.0).abs()).collect();
    assert!(dev.windows(2).all(|w| w[1] <= w[0]), "{dev:?}");
    assert!(*dev.last().unwrap() < 0.05);
    assert!(stationary(&q.chain, 10).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mean_batch_is_rate_ratio(
        rates in proptest::collection::vec(0.05f64..2.0, 6),
        batch in proptest::collection::vec(0.01f64..1.0, 1..8),
    ) {
        let b = random_bmap(&rates, &batch);
        let (g, _) = batch_distributions(&b).unwrap();
        prop_assert!((g.mean().unwrap() - b.lambda() / b.lambda_g()).abs() < 1e-10);
    }

    #[test]
    fn uniformized_rows_are_stochastic(
        rates in proptest::collection::vec(0.05f64..2.0, 6),
        batch in proptest::collection::vec(0.01f64..1.0, 1..8),
    ) {
        let b = random_bmap(&rates, &batch);
        let l = uniformize(&b).unwrap();
        let rows = l.total() * DVector::repeat(2, 1.0);
        prop_assert!(rows.iter().all(|r| (r - 1.0).abs() < 1e-12));
        prop_assert!(l.at(0).unwrap().iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn embedded_drift_is_load_minus_one(
        rates in proptest::collection::vec(0.05f64..2.0, 6),
        batch in proptest::collection::vec(0.01f64..1.0, 1..5),
        rho in 0.2f64..0.85,
    ) {
        let m = with_rho(random_bmap(&rates, &batch), rho, |h| ServiceDist::Erlang { shape: 2, rate: 2.0 / h });
        let k = kernels(&m, 150).unwrap();
        let report = embed_mg1(&k).unwrap().validate().unwrap();
        prop_assert!((report.sigma - (rho - 1.0)).abs() < 1e-8);
        prop_assert!((report.pi_row() - m.bmap().varpi()).abs().max() < 1e-10);
    }
}
