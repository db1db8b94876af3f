use gigtail::blockseq::MatrixSeq;
use gigtail::bmapq::{Bmap, QueueModel};
use gigtail::bulkq::{solve_bulk, BulkModel};
use gigtail::heavytail::ServiceDist;
use gigtail::simoracle::*;
use nalgebra::DMatrix;

fn two_phase_map() -> Bmap {
    let c = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.3, -1.0]);
    let d = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.2, 0.5]);
    Bmap::map(c, d).unwrap()
}

fn mm1() -> QueueModel {
    QueueModel::new(Bmap::poisson(0.5).unwrap(), ServiceDist::Exponential { rate: 1.0 }).unwrap()
}

#[test]
fn same_seed_is_bit_identical() {
    let batch = {
        let c = DMatrix::from_row_slice(2, 2, &[-3.0, 0.4, 0.6, -2.0]);
        let head = [0.5, 0.3, 0.2]
            .iter()
            .map(|w| DMatrix::from_row_slice(2, 2, &[1.8 * w, 0.8 * w, 0.5 * w, 0.9 * w]))
            .collect();
        Bmap::new(c, MatrixSeq::finite(1, head).unwrap()).unwrap()
    };
    let m = QueueModel::new(batch, ServiceDist::pareto_with_mean(2.5, 0.1).unwrap()).unwrap();
    let mut cfg = SimConfig::new(200_000, 99, 3, 40);
    cfg.log_events = 50;
    let a = simulate_bmap_queue(&m, &cfg).unwrap();
    let b = simulate_bmap_queue(&m, &cfg).unwrap();
    assert_eq!(a, b);
    let bits = |d: &EmpiricalDist| d.mean.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.time), bits(&b.time));
    cfg.seed = 100;
    let c = simulate_bmap_queue(&m, &cfg).unwrap();
    assert_ne!(bits(&a.time), bits(&c.time));
}

#[test]
fn mm1_matches_closed_form() {
    let r = simulate_bmap_queue(&mm1(), &SimConfig::new(2_000_000, 7, 8, 40)).unwrap();
    for k in 0..=20 {
        let want = 0.5 * 0.5f64.powi(k as i32);
        let z = (r.time.level_prob(k) - want) / r.time.level_std_error[k];
        assert!(z.abs() < 3.0, "k={k} z={z}");
    }
    assert!((r.time.level_prob(0) - 0.5).abs() < 3.0 * r.time.level_std_error[0]);
    assert_eq!(r.conservation_failures, 0);
}

#[test]
fn unit_bulk_rule_matches_ordinary_queue() {
    let map = two_phase_map();
    let service = ServiceDist::Erlang { shape: 2, rate: 2.0 * map.lambda() / 0.6 };
    let q = QueueModel::new(map.clone(), service.clone()).unwrap();
    let bm = BulkModel::new(map, service, 1, 1).unwrap();
    let a = simulate_bmap_queue(&q, &SimConfig::new(1_000_000, 1, 6, 30)).unwrap();
    let b = simulate_bulk_queue(&bm, &SimConfig::new(1_000_000, 2, 6, 30)).unwrap();
    for k in 0..=15 {
        let se = a.time.level_std_error[k].hypot(b.time.level_std_error[k]);
        let z = (a.time.level_prob(k) - b.time.level_prob(k)) / se;
        assert!(z.abs() < 3.5, "k={k} z={z}");
    }
}

#[test]
fn bulk_rule_and_cycle_length() {
    let map = two_phase_map();
    let service = ServiceDist::Exponential { rate: map.lambda() / 2.0 };
    let m = BulkModel::new(map, service, 2, 5).unwrap();
    let mut cfg = SimConfig::new(2_000_000, 11, 8, 40);
    cfg.log_events = 5000;
    let r = simulate_bulk_queue(&m, &cfg).unwrap();
    assert_eq!(r.rule_violations, 0);
    assert_eq!(r.conservation_failures, 0);
    assert!(r.log.windows(2).all(|w| w[1].time >= w[0].time));
    assert_eq!(r.log.len(), 5000);
    let sol = solve_bulk(&m, 60).unwrap();
    let z = (r.mean_interdeparture - sol.eta) / r.mean_interdeparture_se;
    assert!(z.abs() < 3.0, "eta {} sim {} z={z}", sol.eta, r.mean_interdeparture);
}

#[test]
fn invalid_configurations_are_rejected() {
    let m = mm1();
    let mut cfg = SimConfig::new(100_000, 1, 1, 10);
    cfg.warmup_fraction = 1.0;
    assert!(simulate_bmap_queue(&m, &cfg).is_err());
    cfg.warmup_fraction = 0.1;
    cfg.replications = 0;
    assert!(simulate_bmap_queue(&m, &cfg).is_err());
}

#[test]
fn seeds_are_split_per_stream() {
    assert_ne!(stream_seed(1, 0, STREAM_PHASE), stream_seed(1, 0, STREAM_SERVICE));
    assert_eq!(stream_seed(5, 3, STREAM_BATCH), stream_seed(5, 3, STREAM_BATCH));
}

#[test]
fn poisson_count_at_pareto_time() {
    let b = Bmap::poisson(1.0).unwrap();
    let t = ServiceDist::Pareto { alpha: 1.5, scale: 1.0 };
    let r = sampled_count_tail(&b, &t, &[100, 1000, 10_000], 0.15).unwrap();
    assert!(!r.light_tailed_flag);
    let last = r.report.points.last().unwrap().ratio;
    assert!((0.85..=1.15).contains(&last), "{:?}", r.report);
}

#[test]
fn deterministic_time_is_flagged() {
    let b = Bmap::poisson(1.0).unwrap();
    let r = sampled_count_tail(&b, &ServiceDist::Deterministic { value: 5.0 }, &[10, 20, 40], 0.15).unwrap();
    assert!(r.light_tailed_flag);
    assert!(r.values.iter().all(|(k, _, reference)| *k < 5 || *reference == 0.0));
}

#[test]
fn map_count_at_pareto_time_trends_to_one() {
    let t = ServiceDist::Pareto { alpha: 1.5, scale: 1.0 };
    let r = sampled_count_tail(&two_phase_map(), &t, &[250, 500, 1000, 2000, 4000], 0.15).unwrap();
    let dev: Vec<f64> = r.report.points.iter().map(|p| (p.ratio - 1.0).abs()).collect();
    assert!(dev.windows(2).all(|w| w[1] <= w[0]), "{dev:?}");
}
