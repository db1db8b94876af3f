//! Discrete-event simulation of the BMAP/GI/1 and MAP/GI^(a,b)/1 queues,
//! and the tail of a counting process sampled at a heavy-tailed time.
//!
//! Every replication draws from three ChaCha8 streams, one per stochastic
//! component: phase holding times and jumps, batch sizes beyond the stored
//! head, and service times. The seed of stream `c` in replication `r` is
//! `splitmix64(splitmix64(master ⊕ r·0x9E3779B97F4A7C15) ⊕ c)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{ratio_report_from, TailRatioReport};
use crate::blockseq::SeqTail;
use crate::bmapq::{kernels_with, Bmap, KernelMethod, QueueError, QueueModel};
use crate::bulkq::BulkModel;
use crate::heavytail::{DiscreteDist, ServiceDist};

/// Smallest accepted event budget.
pub const MIN_EVENTS: u64 = 100_000;

/// Stream index for phase holding times and jumps.
pub const STREAM_PHASE: u64 = 0;
/// Stream index for batch sizes.
pub const STREAM_BATCH: u64 = 1;
/// Stream index for service times.
pub const STREAM_SERVICE: u64 = 2;

/// Simulation budget and seeding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    /// Events per replication (phase changes and service completions).
    pub events: u64,
    /// Fraction of each replication discarded as warm-up.
    pub warmup_fraction: f64,
    /// Master seed.
    pub seed: u64,
    /// Number of independent replications.
    pub replications: usize,
    /// Levels above this are pooled into one overflow cell.
    pub max_level: usize,
    /// Batches per replication used for the standard errors.
    pub batches: usize,
    /// Records the first this many events of replication 0.
    pub log_events: usize,
}

impl SimConfig {
    /// Configuration with no event log, a 10% warm-up and 10 batches.
    pub fn new(events: u64, seed: u64, replications: usize, max_level: usize) -> Self {
        SimConfig { events, warmup_fraction: 0.1, seed, replications, max_level, batches: 10, log_events: 0 }
    }

    fn validate(&self) -> Result<(), QueueError> {
        if self.events < MIN_EVENTS {
            return Err(QueueError::InvalidArgument(format!("event budget {} is below {MIN_EVENTS}", self.events)));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(QueueError::InvalidArgument(format!("warm-up fraction {}", self.warmup_fraction)));
        }
        if self.batches == 0 {
            return Err(QueueError::InvalidArgument("at least one batch is required".into()));
        }
        if self.replications == 0 {
            return Err(QueueError::InvalidArgument("at least one replication is required".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of stream `component` in replication `rep`.
pub fn stream_seed(master: u64, rep: u64, component: u64) -> u64 {
    splitmix64(splitmix64(master ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ component)
}

fn stream(master: u64, rep: u64, component: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, rep, component))
}

/// Replication-averaged histogram over `(level, phase)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDist {
    /// Number of phases.
    pub phases: usize,
    /// Levels `0..=max_level`; the last cell pools everything above.
    pub max_level: usize,
    /// Mean probability per cell, row-major in `(level, phase)`.
    pub mean: Vec<f64>,
    /// Standard error per cell from batch means pooled over replications.
    pub std_error: Vec<f64>,
    /// Standard error of each level probability.
    pub level_std_error: Vec<f64>,
    /// Total weight per replication (time or number of epochs).
    pub weights: Vec<f64>,
}

impl EmpiricalDist {
    /// `reps[r][b]` is the histogram of batch `b` in replication `r`.
    fn from_batches(phases: usize, max_level: usize, reps: &[Vec<Vec<f64>>]) -> Self {
        let cells = (max_level + 1) * phases;
        let normalize = |h: &[f64]| -> Vec<f64> {
            let w: f64 = h.iter().sum();
            h.iter().map(|v| if w > 0.0 { v / w } else { 0.0 }).collect()
        };
        let totals: Vec<Vec<f64>> =
            reps.iter().map(|batches| (0..cells).map(|c| batches.iter().map(|h| h[c]).sum()).collect()).collect();
        let weights: Vec<f64> = totals.iter().map(|h| h.iter().sum()).collect();
        let per_rep: Vec<Vec<f64>> = totals.iter().map(|h| normalize(h)).collect();
        let per_batch: Vec<Vec<f64>> = reps.iter().flatten().map(|h| normalize(h)).collect();
        let r = per_rep.len() as f64;
        let n = per_batch.len() as f64;
        let spread = |values: &dyn Fn(&[f64]) -> f64| -> (f64, f64) {
            let m = per_rep.iter().map(|h| values(h)).sum::<f64>() / r;
            if per_batch.len() < 2 {
                return (m, f64::NAN);
            }
            let bm = per_batch.iter().map(|h| values(h)).sum::<f64>() / n;
            let var = per_batch.iter().map(|h| (values(h) - bm).powi(2)).sum::<f64>() / (n - 1.0);
            (m, (var / n).sqrt())
        };
        let mut mean = vec![0.0; cells];
        let mut std_error = vec![0.0; cells];
        for c in 0..cells {
            let (m, s) = spread(&|h: &[f64]| h[c]);
            mean[c] = m;
            std_error[c] = s;
        }
        let level_std_error =
            (0..=max_level).map(|k| spread(&|h: &[f64]| h[k * phases..(k + 1) * phases].iter().sum()).1).collect();
        EmpiricalDist { phases, max_level, mean, std_error, level_std_error, weights }
    }

    /// `P(L = k, J = i)`.
    pub fn prob(&self, k: usize, i: usize) -> f64 {
        self.mean[k * self.phases + i]
    }

    /// `P(L = k)`.
    pub fn level_prob(&self, k: usize) -> f64 {
        self.mean[k * self.phases..(k + 1) * self.phases].iter().sum()
    }

    /// Standard error of `P(L = k, J = i)`.
    pub fn cell_std_error(&self, k: usize, i: usize) -> f64 {
        self.std_error[k * self.phases + i]
    }
}

/// One logged event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    /// Event time.
    pub time: f64,
    /// `"phase"`, `"arrival"` or `"departure"`.
    pub kind: &'static str,
    /// Number in system after the event.
    pub level: usize,
    /// Phase after the event.
    pub phase: usize,
}

/// Simulation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    /// Time-average occupancy.
    pub time: EmpiricalDist,
    /// Queue length just after service completions.
    pub departure: EmpiricalDist,
    /// Mean time between service completions.
    pub mean_interdeparture: f64,
    /// Its standard error across replications.
    pub mean_interdeparture_se: f64,
    /// Services that started with fewer than `a` or more than `b` customers.
    pub rule_violations: u64,
    /// Paths on which arrivals − departures differs from the final level.
    pub conservation_failures: u64,
    /// Configuration used.
    pub config: SimConfig,
    /// Logged events of replication 0.
    pub log: Vec<EventRecord>,
}

enum Outcome {
    Phase(usize),
    Batch(u64, usize),
    TailBatch,
}

/// Per-phase jump tables of a BMAP.
struct Jumps {
    rate: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
    outcomes: Vec<Vec<Outcome>>,
    tail_phase: Vec<f64>,
    tail_dist: Option<(DiscreteDist, i64)>,
}

impl Jumps {
    fn new(b: &Bmap) -> Result<Self, QueueError> {
        let m = b.phases();
        let c = b.c();
        let d = b.d();
        let k_max = d.k_max().max(0);
        let mut rate = Vec::with_capacity(m);
        let mut cumulative = Vec::with_capacity(m);
        let mut outcomes = Vec::with_capacity(m);
        let (tail_v, tail_phase, tail_dist) = match d.tail() {
            SeqTail::RankOne { v, w, dist } => {
                let ws = w.sum();
                let cum: Vec<f64> = w
                    .iter()
                    .scan(0.0, |s, x| {
                        *s += x / ws;
                        Some(*s)
                    })
                    .collect();
                let mass: Vec<f64> = v.iter().map(|vi| vi * ws * dist.tail(k_max)).collect();
                (mass, cum, Some((dist.clone(), k_max)))
            }
            SeqTail::None => (vec![0.0; m], Vec::new(), None),
            SeqTail::Aggregate { .. } => {
                return Err(QueueError::InvalidBmap("simulation needs finite or rank-one batch blocks".into()))
            }
        };
        for i in 0..m {
            let r = -c[(i, i)];
            let mut cum = Vec::new();
            let mut out = Vec::new();
            let mut s = 0.0;
            for j in 0..m {
                if j != i && c[(i, j)] > 0.0 {
                    s += c[(i, j)] / r;
                    cum.push(s);
                    out.push(Outcome::Phase(j));
                }
            }
            for k in d.k_min()..=k_max {
                let blk = d.at(k)?;
                for j in 0..m {
                    if blk[(i, j)] > 0.0 {
                        s += blk[(i, j)] / r;
                        cum.push(s);
                        out.push(Outcome::Batch(k as u64, j));
                    }
                }
            }
            if tail_v[i] > 0.0 {
                s += tail_v[i] / r;
                cum.push(s);
                out.push(Outcome::TailBatch);
            }
            let last = cum.len().saturating_sub(1);
            cum.iter_mut().for_each(|v| *v /= s);
            if let Some(v) = cum.get_mut(last) {
                *v = 1.0;
            }
            rate.push(r);
            cumulative.push(cum);
            outcomes.push(out);
        }
        Ok(Jumps { rate, cumulative, outcomes, tail_phase, tail_dist })
    }

    /// Next jump from phase `i`: `(holding time, batch size, new phase)`.
    fn step(&self, i: usize, phase_rng: &mut ChaCha8Rng, batch_rng: &mut ChaCha8Rng) -> (f64, u64, usize) {
        let hold = -(1.0 - phase_rng.gen::<f64>()).ln() / self.rate[i];
        let u: f64 = phase_rng.gen();
        let idx = self.cumulative[i].partition_point(|c| *c < u).min(self.outcomes[i].len() - 1);
        match self.outcomes[i][idx] {
            Outcome::Phase(j) => (hold, 0, j),
            Outcome::Batch(k, j) => (hold, k, j),
            Outcome::TailBatch => {
                let (dist, after) = self.tail_dist.as_ref().expect("tail outcome needs a tail law");
                let k = dist.sample_beyond(*after, batch_rng);
                let v: f64 = phase_rng.gen();
                let j = self.tail_phase.partition_point(|c| *c < v).min(self.tail_phase.len() - 1);
                (hold, k, j)
            }
        }
    }
}

struct RepOutput {
    time: Vec<Vec<f64>>,
    departure: Vec<Vec<f64>>,
    interdeparture: f64,
    violations: u64,
    conservation_ok: bool,
    log: Vec<EventRecord>,
}

/// Service rule: `(a, b)` bulk service; `a = b = 1` is the ordinary queue.
#[derive(Clone, Copy)]
struct Rule {
    a: usize,
    b: usize,
}

fn replicate(b: &Bmap, jumps: &Jumps, service: &ServiceDist, rule: Rule, cfg: &SimConfig, rep: u64) -> RepOutput {
    let m = b.phases();
    let cells = (cfg.max_level + 1) * m;
    let mut phase_rng = stream(cfg.seed, rep, STREAM_PHASE);
    let mut batch_rng = stream(cfg.seed, rep, STREAM_BATCH);
    let mut service_rng = stream(cfg.seed, rep, STREAM_SERVICE);
    let mut time_hist = vec![vec![0.0; cells]; cfg.batches];
    let mut dep_hist = vec![vec![0.0; cells]; cfg.batches];
    let cell = |l: usize, j: usize| l.min(cfg.max_level) * m + j;

    let warm = (cfg.events as f64 * cfg.warmup_fraction) as u64;
    let batch_len = ((cfg.events - warm) / cfg.batches as u64).max(1);
    let mut t = 0.0;
    let mut level = 0usize;
    let mut in_service = 0usize;
    let mut phase = {
        let u: f64 = phase_rng.gen();
        let mut s = 0.0;
        let w = b.varpi();
        (0..m)
            .find(|&i| {
                s += w[i];
                u < s
            })
            .unwrap_or(m - 1)
    };
    let (h0, k0, j0) = jumps.step(phase, &mut phase_rng, &mut batch_rng);
    let mut next_jump = (t + h0, k0, j0);
    let mut next_departure = f64::INFINITY;
    let (mut arrivals, mut departed) = (0u64, 0u64);
    let mut violations = 0u64;
    let (mut dep_count, mut t_start) = (0u64, 0.0);
    let mut log = Vec::new();
    let want_log = if rep == 0 { cfg.log_events } else { 0 };

    for event in 0..cfg.events {
        let recording = event >= warm;
        let batch = (event.saturating_sub(warm) / batch_len).min(cfg.batches as u64 - 1) as usize;
        if event == warm {
            t_start = t;
        }
        let t_next = next_jump.0.min(next_departure);
        if recording {
            time_hist[batch][cell(level, phase)] += t_next - t;
        }
        t = t_next;
        let start_service = |level: usize, rng: &mut ChaCha8Rng| -> (usize, f64) {
            let n = level.min(rule.b);
            (n, t + service.sample(rng))
        };
        if next_departure <= next_jump.0 {
            level -= in_service;
            departed += in_service as u64;
            in_service = 0;
            next_departure = f64::INFINITY;
            if recording {
                dep_hist[batch][cell(level, phase)] += 1.0;
                dep_count += 1;
            }
            if log.len() < want_log {
                log.push(EventRecord { time: t, kind: "departure", level, phase });
            }
            if level >= rule.a {
                let (n, d) = start_service(level, &mut service_rng);
                in_service = n;
                next_departure = d;
            }
        } else {
            let (_, k, j) = next_jump;
            phase = j;
            level += k as usize;
            arrivals += k;
            if log.len() < want_log {
                log.push(EventRecord { time: t, kind: if k > 0 { "arrival" } else { "phase" }, level, phase });
            }
            if in_service == 0 && k > 0 && level >= rule.a {
                let (n, d) = start_service(level, &mut service_rng);
                in_service = n;
                next_departure = d;
            }
            let (h, k2, j2) = jumps.step(phase, &mut phase_rng, &mut batch_rng);
            next_jump = (t + h, k2, j2);
        }
        if in_service > 0 && (in_service < rule.a || in_service > rule.b) {
            violations += 1;
        }
    }
    RepOutput {
        time: time_hist,
        departure: dep_hist,
        interdeparture: if dep_count > 0 { (t - t_start) / dep_count as f64 } else { f64::NAN },
        violations,
        conservation_ok: arrivals - departed == level as u64,
        log,
    }
}

fn run(b: &Bmap, service: &ServiceDist, rule: Rule, cfg: &SimConfig) -> Result<SimResult, QueueError> {
    cfg.validate()?;
    let jumps = Jumps::new(b)?;
    let reps: Vec<RepOutput> =
        (0..cfg.replications as u64).into_par_iter().map(|r| replicate(b, &jumps, service, rule, cfg, r)).collect();
    let m = b.phases();
    let time: Vec<Vec<Vec<f64>>> = reps.iter().map(|r| r.time.clone()).collect();
    let dep: Vec<Vec<Vec<f64>>> = reps.iter().map(|r| r.departure.clone()).collect();
    let n = reps.len() as f64;
    let mean_id = reps.iter().map(|r| r.interdeparture).sum::<f64>() / n;
    let se_id = if reps.len() > 1 {
        (reps.iter().map(|r| (r.interdeparture - mean_id).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(SimResult {
        time: EmpiricalDist::from_batches(m, cfg.max_level, &time),
        departure: EmpiricalDist::from_batches(m, cfg.max_level, &dep),
        mean_interdeparture: mean_id,
        mean_interdeparture_se: se_id,
        rule_violations: reps.iter().map(|r| r.violations).sum(),
        conservation_failures: reps.iter().filter(|r| !r.conservation_ok).count() as u64,
        config: cfg.clone(),
        log: reps.into_iter().next().map(|r| r.log).unwrap_or_default(),
    })
}

/// Simulates the BMAP/GI/1 queue.
pub fn simulate_bmap_queue(m: &QueueModel, cfg: &SimConfig) -> Result<SimResult, QueueError> {
    run(m.bmap(), m.service(), Rule { a: 1, b: 1 }, cfg)
}

/// Simulates the MAP/GI^(a,b)/1 queue.
pub fn simulate_bulk_queue(m: &BulkModel, cfg: &SimConfig) -> Result<SimResult, QueueError> {
    run(m.map(), m.service(), Rule { a: m.a(), b: m.b() }, cfg)
}

/// `P(N(T) > k)` against `P(T > k/λ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledCountReport {
    /// `(k, ϖ-weighted P(N(T) > k), P(T > k/λ))`.
    pub values: Vec<(usize, f64, f64)>,
    /// Ratio summary.
    pub report: TailRatioReport,
    /// `T` has an exponentially decaying tail, so the equivalence is not expected.
    pub light_tailed_flag: bool,
}

/// Tail of the count `N(T)` of BMAP arrivals during an independent time
/// `T`, started from `ϖ`, from the uniformized kernel mixed over `T`.
pub fn sampled_count_tail(
    b: &Bmap,
    t: &ServiceDist,
    levels: &[usize],
    tol: f64,
) -> Result<SampledCountReport, QueueError> {
    let top = *levels.iter().max().ok_or_else(|| QueueError::InvalidArgument("empty window".into()))?;
    let method = match t {
        ServiceDist::Exponential { .. } | ServiceDist::Erlang { .. } => KernelMethod::Resolvent,
        _ => KernelMethod::Uniformization,
    };
    let k = kernels_with(b, t, top, method)?;
    let w = b.varpi();
    let mut values = Vec::with_capacity(levels.len());
    for &l in levels {
        let count = (w * k.p.overline_e(l as i64)?)[0];
        values.push((l, count, t.tail(l as f64 / b.lambda())));
    }
    let report = ratio_report_from(&values, tol);
    Ok(SampledCountReport { values, report, light_tailed_flag: t.is_light_tailed() })
}
