use gigtail::bmapq::*;
use gigtail::bulkq::*;
use gigtail::heavytail::ServiceDist;
use nalgebra::{DMatrix, DVector};

fn two_phase_map() -> Bmap {
    let c = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.3, -1.0]);
    let d = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.2, 0.5]);
    Bmap::map(c, d).unwrap()
}

fn bulk(map: Bmap, rho: f64, a: usize, b: usize, make: impl Fn(f64) -> ServiceDist) -> BulkModel {
    let h = rho / map.lambda();
    BulkModel::new(map, make(h), a, b).unwrap()
}

fn pareto(h: f64) -> ServiceDist {
    ServiceDist::pareto_with_mean(2.5, h).unwrap()
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

#[test]
fn unit_thresholds_with_poisson_match_the_mg1_embedding() {
    let m = bulk(Bmap::poisson(0.6).unwrap(), 0.6, 1, 1, |h| ServiceDist::Erlang { shape: 2, rate: 2.0 / h });
    let k = bulk_kernels(&m, 80).unwrap();
    let bulk_chain = build_embedded(&m, &k).unwrap();
    let mg1 = embed_mg1(&k).unwrap();
    for l in -1..=60 {
        assert!(max_diff(&bulk_chain.a().at(l).unwrap(), &mg1.a().at(l).unwrap()) < 1e-12, "A({l})");
    }
    for l in 1..=60 {
        assert!(max_diff(&bulk_chain.b_up().at(l).unwrap(), &mg1.b_up().at(l).unwrap()) < 1e-12, "B({l})");
    }
    assert!(max_diff(bulk_chain.b0(), mg1.b0()) < 1e-12);
    assert!(max_diff(bulk_chain.b_down(1), mg1.b_down(1)) < 1e-12);
}

#[test]
fn unit_thresholds_with_map_match_the_mg1_pipeline() {
    let map = two_phase_map();
    let m = bulk(map.clone(), 0.6, 1, 1, |h| ServiceDist::Erlang { shape: 2, rate: 2.0 / h });
    let sol = solve_bulk(&m, 300).unwrap();
    let q = queue_stationary(&QueueModel::new(map, m.service().clone()).unwrap(), 300).unwrap();
    let k = bulk_kernels(&m, 80).unwrap();
    let mg1 = embed_mg1(&k).unwrap();
    let chain = build_embedded(&m, &k).unwrap();
    for l in -1..=60 {
        assert!(max_diff(&chain.a().at(l).unwrap(), &mg1.a().at(l).unwrap()) < 1e-12, "A({l})");
    }
    for l in 0..=300 {
        let gap = (sol.time.level(l).unwrap() - q.sol.level(l).unwrap()).abs().max();
        assert!(gap < 1e-8, "level {l}: {gap}");
    }
    assert!((m.service().mean() / sol.eta - m.rho()).abs() < 1e-10);
}

#[test]
fn unit_thresholds_mm1_is_geometric() {
    let m = bulk(Bmap::poisson(0.5).unwrap(), 0.5, 1, 1, |h| ServiceDist::Exponential { rate: 1.0 / h });
    let sol = solve_bulk(&m, 80).unwrap();
    assert!((sol.time.level_mass(0) - 0.5).abs() < 1e-12);
    for k in 0..=60 {
        assert!((sol.time.level_mass(k) - 0.5 * 0.5f64.powi(k as i32)).abs() < 1e-12, "level {k}");
    }
}

#[test]
fn embedded_rows_are_stochastic_with_drift_load_minus_b() {
    for (a, b, rho) in [(2, 3, 1.5), (2, 5, 2.0), (1, 4, 3.0), (3, 3, 2.2)] {
        let m = bulk(two_phase_map(), rho, a, b, |h| ServiceDist::Erlang { shape: 3, rate: 3.0 / h });
        let k = bulk_kernels(&m, 300).unwrap();
        let chain = build_embedded(&m, &k).unwrap();
        let report = chain.validate().unwrap();
        assert!(report.row_sum_residual < 1e-12, "({a},{b}) rows {}", report.row_sum_residual);
        assert!((report.sigma - (rho - b as f64)).abs() < 1e-8, "({a},{b}) drift {}", report.sigma);
        assert!((report.pi_row() - m.map().varpi()).abs().max() < 1e-10);
    }
}

#[test]
fn phase_step_preserves_ones() {
    let m = bulk(two_phase_map(), 1.0, 2, 3, |h| ServiceDist::Exponential { rate: 1.0 / h });
    let w = phase_step(&m).unwrap();
    assert!((w * DVector::repeat(2, 1.0) - DVector::repeat(2, 1.0)).abs().max() < 1e-12);
}

#[test]
fn both_families_are_normalized() {
    for (a, b) in [(1, 2), (2, 3), (2, 5)] {
        let m = bulk(two_phase_map(), 0.8 * b as f64, a, b, |h| ServiceDist::Deterministic { value: h });
        let sol = solve_bulk(&m, 600).unwrap();
        assert!((sol.departure_total() - 1.0).abs() < 1e-10, "({a},{b})");
        assert!((sol.time_total() - 1.0).abs() < 1e-8, "({a},{b}) {}", sol.time_total());
        assert!(sol.eta >= m.service().mean());
    }
}

#[test]
fn mean_cycle_approaches_service_mean_under_heavy_load() {
    let etas: Vec<f64> = [1.0, 2.0, 3.0, 4.0, 4.6]
        .iter()
        .map(|&rho| {
            let m = bulk(two_phase_map(), rho, 2, 5, |h| ServiceDist::Exponential { rate: 1.0 / h });
            let sol = solve_bulk(&m, 800).unwrap();
            sol.eta / m.service().mean() - 1.0
        })
        .collect();
    assert!(etas.windows(2).all(|w| w[1] < w[0]), "{etas:?}");
    assert!(*etas.last().unwrap() < 0.02);
}

#[test]
fn unit_threshold_time_prefactor_is_the_mg1_one() {
    let m = bulk(two_phase_map(), 0.5, 1, 1, pareto);
    let sol = solve_bulk(&m, 50).unwrap();
    let (dep, time) = bulk_tail_asymptotes(&m, &sol).unwrap();
    let w = m.map().varpi();
    let want = w * (m.rho() / (1.0 - m.rho()));
    for i in 0..2 {
        assert!((time.prefactor[i] - want[i]).abs() < 1e-10);
        assert!((dep.prefactor[i] - want[i]).abs() < 1e-12);
    }
}

#[test]
fn departure_prefactor_decreases_in_b() {
    let mut prev = f64::INFINITY;
    for b in 1..=6 {
        let m = bulk(two_phase_map(), 0.9, 1, b, pareto);
        let sol = solve_bulk(&m, 20).unwrap();
        let (dep, _) = bulk_tail_asymptotes(&m, &sol).unwrap();
        assert!(dep.scale() < prev);
        prev = dep.scale();
    }
}

#[test]
fn light_tailed_service_is_rejected() {
    let m = bulk(two_phase_map(), 1.0, 2, 3, |h| ServiceDist::Exponential { rate: 1.0 / h });
    let sol = solve_bulk(&m, 20).unwrap();
    assert!(matches!(bulk_tail_asymptotes(&m, &sol), Err(QueueError::InconsistentInput(_))));
}

#[test]
fn bulk_tails_follow_the_service_equilibrium() {
    let m = bulk(two_phase_map(), 1.5, 2, 3, pareto);
    let levels = 4000;
    let sol = solve_bulk(&m, levels).unwrap();
    let (dep, time) = bulk_tail_asymptotes(&m, &sol).unwrap();
    for k in [1000usize, 2000, 3000] {
        let rd = sol.departure.tail_mass(k) / dep.predicted_tail(k as i64);
        let rt = sol.time.tail_mass(k) / time.predicted_tail(k as i64);
        assert!((0.8..=1.2).contains(&rd), "departure k={k}: {rd}");
        assert!((0.8..=1.2).contains(&rt), "time k={k}: {rt}");
    }
    let dev = block_tail_deviation(&m, &sol.chain, &[250, 500, 1000, 2000]).unwrap();
    assert!(dev.windows(2).all(|w| w[1].a_deviation < w[0].a_deviation), "{dev:?}");
    assert!(dev.windows(2).all(|w| w[1].b_deviation < w[0].b_deviation), "{dev:?}");
}
