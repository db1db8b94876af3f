//! The five commands.

use gigtail::asymptotics::{
    coefficients_from_parametric, log_grid, predict_tail, tail_ratio_report, TailPrediction, TailRatioReport,
};
use gigtail::bmapq::{queue_stationary, queue_tail_asymptote, QueueModel, Regime};
use gigtail::bulkq::{
    bulk_tail_asymptotes, departure_distribution, mean_cycle, solve_bulk, time_stationary, BulkModel,
};
use gigtail::gig1core::{
    stationary, stationary_with, structural_constants, truncated_solve, FirstPassageOptions, StationarySolution,
};
use gigtail::model::{Model, ModelFile, SolverOptions};
use gigtail::simoracle::{simulate_bmap_queue, simulate_bulk_queue, SimConfig, SimResult};
use serde_json::{json, Value};

use crate::exit::CliError;
use crate::report::{finite, Emitter, Table};

pub const DEFAULT_LEVELS: usize = 200;
pub const DEFAULT_TOL: f64 = 0.2;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_EVENTS: u64 = 1_000_000;
pub const DEFAULT_REPLICATIONS: usize = 8;
/// Points on the logarithmic tail-ratio grid.
pub const WINDOW_POINTS: usize = 16;
/// Levels with less analytic mass are left out of the simulation z-score.
pub const Z_MASS_FLOOR: f64 = 1e-3;

/// Effective settings after flags override the model file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub levels: usize,
    pub tol: f64,
    pub seed: u64,
    pub events: u64,
    pub replications: usize,
    pub window: Option<[usize; 2]>,
    pub truncation: Option<usize>,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub levels: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub events: Option<u64>,
    pub replications: Option<usize>,
}

impl Settings {
    pub fn resolve(flags: &Overrides, opts: &SolverOptions) -> Result<Self, CliError> {
        let s = Settings {
            levels: flags.levels.or(opts.levels).unwrap_or(DEFAULT_LEVELS),
            tol: flags.tol.or(opts.tol).unwrap_or(DEFAULT_TOL),
            seed: flags.seed.or(opts.seed).unwrap_or(DEFAULT_SEED),
            events: flags.events.or(opts.events).unwrap_or(DEFAULT_EVENTS),
            replications: flags.replications.or(opts.replications).unwrap_or(DEFAULT_REPLICATIONS),
            window: opts.window,
            truncation: opts.truncation,
        };
        if s.levels == 0 {
            return Err(CliError::usage("--levels must be positive"));
        }
        if !(s.tol > 0.0) {
            return Err(CliError::usage("--tol must be positive"));
        }
        Ok(s)
    }

    fn json(&self) -> Value {
        json!({
            "levels": self.levels,
            "tol": self.tol,
            "seed": self.seed,
            "events": self.events,
            "replications": self.replications,
            "window": self.window,
            "truncation": self.truncation,
        })
    }

    fn sim_config(&self, max_level: usize) -> SimConfig {
        SimConfig::new(self.events, self.seed, self.replications, max_level)
    }
}

fn kind(model: &Model) -> &'static str {
    match model {
        Model::Chain(_) => "gig1",
        Model::Queue(..) => "bmap-queue",
        Model::Bulk(_) => "bulk-queue",
    }
}

fn header(command: &str, model: &Model, s: &Settings) -> Value {
    json!({ "command": command, "kind": kind(model), "settings": s.json() })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn level(sol: &StationarySolution, k: usize) -> Option<&nalgebra::RowDVector<f64>> {
    sol.level(k)
}

/// `validate`: block checks, drift and stability.
pub fn validate(file: &ModelFile, model: &Model, s: &Settings, echo: bool, em: &Emitter) -> Result<(), CliError> {
    let body = match model {
        Model::Chain(c) => {
            let r = c.validate()?;
            json!({
                "valid": true,
                "sigma": r.sigma,
                "pi": r.pi,
                "row_sum_residual": r.row_sum_residual,
                "mass_deficit": r.tail_deficit,
                "heuristic_flags": { "window_irreducible": r.window_irreducible },
            })
        }
        Model::Queue(m, regime) => {
            let b = m.bmap();
            json!({
                "valid": true,
                "rho": m.rho(),
                "sigma": m.rho() - 1.0,
                "lambda": b.lambda(),
                "lambda_g": b.lambda_g(),
                "varpi": b.varpi().iter().collect::<Vec<_>>(),
                "mass_deficit": b.d().deficit(),
                "heuristic_flags": { "regime_hypotheses_asserted": regime.is_some() },
            })
        }
        Model::Bulk(m) => json!({
            "valid": true,
            "rho": m.rho(),
            "sigma": m.rho() - m.b() as f64,
            "lambda": m.map().lambda(),
            "varpi": m.map().varpi().iter().collect::<Vec<_>>(),
            "mass_deficit": 0.0,
            "heuristic_flags": { "aperiodicity_asserted": true },
        }),
    };
    let summary = merge(header("validate", model, s), body);
    if echo {
        let text = file.to_json() + "\n";
        if em.out.is_some() {
            em.emit_text("model.json", &text)?;
            return em.emit("validate", None, summary, None);
        }
        eprintln!("{}", serde_json::to_string_pretty(&summary).expect("JSON values serialize"));
        return em.emit_text("model.json", &text);
    }
    em.emit("validate", None, summary, None)
}

/// `stationary`: per-level, per-phase probabilities and tails.
pub fn stationary_cmd(model: &Model, s: &Settings, em: &Emitter) -> Result<(), CliError> {
    let (sol, extra) = match model {
        Model::Chain(c) => (stationary(c, s.levels)?, json!({ "heuristic_flags": {} })),
        Model::Queue(m, _) => {
            let q = queue_stationary(m, s.levels)?;
            let extra = json!({
                "kernel_levels": q.kernels.levels,
                "series_terms": q.kernels.series_terms,
                "heuristic_flags": {},
            });
            (q.sol, extra)
        }
        Model::Bulk(m) => {
            let b = solve_bulk(m, s.levels)?;
            let extra = json!({
                "eta": b.eta,
                "departure_total": b.departure_total(),
                "heuristic_flags": { "aperiodicity_asserted": true },
            });
            (b.time, extra)
        }
    };
    let mut table = Table::new(&["level", "phase", "probability", "cumulative_tail"]);
    let mut plot = Vec::new();
    for k in 0..=sol.levels() {
        let x = level(&sol, k).expect("level within the solved range");
        for i in 0..x.len() {
            table.push(vec![k.into(), i.into(), x[i].into(), sol.tail[k][i].into()]);
        }
        plot.push((k as f64, sol.tail_mass(k)));
    }
    let summary = merge(
        header("stationary", model, s),
        merge(
            json!({
                "solved_levels": sol.levels(),
                "total_mass": sol.x0.sum() + sol.tail_mass(0),
                "mass_deficit": sol.deficit,
                "method": format!("{:?}", sol.method),
            }),
            extra,
        ),
    );
    em.emit("stationary", Some(&table), summary, Some(&plot))
}

fn default_regime(m: &QueueModel) -> Regime {
    if m.service().is_light_tailed() {
        Regime::LightBatch { d_g: None }
    } else {
        Regime::ServiceDominant
    }
}

fn window(s: &Settings) -> Result<Vec<usize>, CliError> {
    let [lo, hi] = s.window.unwrap_or([(s.levels / 10).max(1), s.levels]);
    if lo > hi || hi > s.levels {
        return Err(CliError::usage(format!("window [{lo}, {hi}] must lie within 0..={}", s.levels)));
    }
    Ok(log_grid(lo, hi, WINDOW_POINTS))
}

fn ratio_json(r: &TailRatioReport) -> Value {
    json!({
        "pass": r.pass,
        "tol": r.tol,
        "min_ratio": finite(r.min_ratio),
        "max_ratio": finite(r.max_ratio),
        "final_ratio": finite(r.final_ratio),
        "approaching_one": r.approaching_one,
    })
}

/// `asymptote`: computed tail against the predicted asymptote.
pub fn asymptote(model: &Model, s: &Settings, em: &Emitter) -> Result<(), CliError> {
    let grid = window(s)?;
    let (sol, pred, flags, extra): (StationarySolution, TailPrediction, Value, Value) = match model {
        Model::Chain(c) => {
            let solved = stationary_with(c, s.levels, &FirstPassageOptions::default())?;
            let structural = structural_constants(c, &solved.report, &solved.fp, &solved.rm)?;
            let tc = coefficients_from_parametric(c)?;
            let pred = predict_tail(&solved.sol, &tc, &solved.report.pi_row(), solved.report.sigma)?;
            let flags = json!({
                "period_heuristic": structural.period_heuristic,
                "reference_family_unverified": !tc.y.is_subexponential_family(),
            });
            (solved.sol, pred, flags, json!({ "sigma": solved.report.sigma, "c_a": tc.c_a, "c_b": tc.c_b }))
        }
        Model::Queue(m, regime) => {
            let regime = regime.clone().unwrap_or_else(|| default_regime(m));
            let light = m.service().is_light_tailed();
            let mismatch = match regime {
                Regime::LightBatch { .. } => !light,
                Regime::ServiceDominant | Regime::ConsistentVariation { .. } => light,
                Regime::Mixed { .. } => false,
            };
            let q = queue_stationary(m, s.levels)?;
            let pred = queue_tail_asymptote(m, &regime)?;
            let flags = json!({
                "regime_hypotheses_asserted": true,
                "regime_service_mismatch": mismatch,
                "d_h_proportionality_unverified": matches!(regime, Regime::ConsistentVariation { .. }),
            });
            (q.sol, pred, flags, json!({ "regime": regime, "rho": m.rho() }))
        }
        Model::Bulk(m) => {
            let b = solve_bulk(m, s.levels)?;
            let (dep, time) = bulk_tail_asymptotes(m, &b)?;
            let dep_report = tail_ratio_report(&b.departure, &dep, &grid, s.tol)?;
            let flags = json!({ "aperiodicity_asserted": true, "subexponential_equilibrium_asserted": true });
            let extra = json!({
                "eta": b.eta,
                "rho": m.rho(),
                "departure": merge(ratio_json(&dep_report), json!({ "prefactor": dep.prefactor })),
            });
            (b.time, time, flags, extra)
        }
    };
    let report = tail_ratio_report(&sol, &pred, &grid, s.tol)?;
    let mut table = Table::new(&["k", "true_tail", "predicted_tail", "ratio"]);
    let mut plot = Vec::new();
    for p in &report.points {
        table.push(vec![p.k.into(), p.true_tail.into(), p.predicted_tail.into(), p.ratio.into()]);
        plot.push((p.k as f64, p.ratio));
    }
    let mut flags = flags;
    flags["preasymptotic_start"] = json!(report.preasymptotic_start);
    let summary = merge(
        header("asymptote", model, s),
        merge(
            merge(
                ratio_json(&report),
                json!({
                    "prefactor": pred.prefactor,
                    "reference": pred.reference,
                    "mass_deficit": sol.deficit,
                    "heuristic_flags": flags,
                }),
            ),
            extra,
        ),
    );
    em.emit("asymptote", Some(&table), summary, Some(&plot))
}

fn truncation(s: &Settings) -> usize {
    s.truncation.unwrap_or((4 * s.levels).max(s.levels + 64))
}

/// `compare`: matrix-analytic, truncated and simulated level masses.
pub fn compare(model: &Model, s: &Settings, em: &Emitter) -> Result<(), CliError> {
    let n = truncation(s);
    if n <= s.levels {
        return Err(CliError::usage(format!("truncation {n} must exceed --levels {}", s.levels)));
    }
    let (analytic, truncated, sim): (StationarySolution, StationarySolution, Option<SimResult>) = match model {
        Model::Chain(c) => (stationary(c, s.levels)?, truncated_solve(c, n)?, None),
        Model::Queue(m, _) => {
            let q = queue_stationary(m, n)?;
            let t = truncated_solve(&q.chain, n)?;
            let sim = simulate_bmap_queue(m, &s.sim_config(s.levels + 1))?;
            (q.sol, t, Some(sim))
        }
        Model::Bulk(m) => {
            let b = solve_bulk(m, n)?;
            let chain_levels = (n + 1).saturating_sub(m.b()).max(1);
            let t = truncated_solve(&b.chain, chain_levels)?;
            let dep = departure_distribution(m, &t);
            let eta = mean_cycle(m, &dep)?;
            let time = time_stationary(m, &b.kernels, &dep, eta)?;
            let sim = simulate_bulk_queue(m, &s.sim_config(s.levels + 1))?;
            (b.time, time, Some(sim))
        }
    };
    let mut table = Table::new(&["level", "analytic", "truncated", "simulated", "simulated_se"]);
    let mut plot = Vec::new();
    let (mut max_diff, mut max_z) = (0.0f64, 0.0f64);
    for k in 0..=s.levels {
        let a = analytic.level_mass(k);
        let t = truncated.level_mass(k);
        max_diff = max_diff.max((a - t).abs());
        let (p, se) = match &sim {
            Some(r) => (Some(r.time.level_prob(k)), Some(r.time.level_std_error[k])),
            None => (None, None),
        };
        if let (Some(p), Some(se)) = (p, se) {
            if se > 0.0 && a >= Z_MASS_FLOOR {
                max_z = max_z.max(((p - a) / se).abs());
            }
        }
        table.push(vec![k.into(), a.into(), t.into(), p.into(), se.into()]);
        plot.push((k as f64, a));
    }
    let sim_json = match &sim {
        Some(r) => json!({
            "max_abs_z": max_z,
            "z_mass_floor": Z_MASS_FLOOR,
            "within_3_sigma": max_z <= 3.0,
            "mean_interdeparture": finite(r.mean_interdeparture),
            "mean_interdeparture_se": finite(r.mean_interdeparture_se),
        }),
        None => Value::Null,
    };
    let summary = merge(
        header("compare", model, s),
        json!({
            "truncation": n,
            "max_abs_diff_truncated": max_diff,
            "simulation": sim_json,
            "mass_deficit": analytic.deficit,
            "heuristic_flags": { "simulation_available": sim.is_some() },
        }),
    );
    em.emit("compare", Some(&table), summary, Some(&plot))
}

fn log_lines(r: &SimResult) -> String {
    r.log.iter().map(|e| serde_json::to_string(e).expect("event records serialize") + "\n").collect()
}

/// `simulate`: time-average and departure-epoch histograms.
pub fn simulate(model: &Model, s: &Settings, log_events: usize, em: &Emitter) -> Result<(), CliError> {
    if log_events > 0 && em.out.is_none() {
        return Err(CliError::usage("--log-events needs --out"));
    }
    let mut cfg = s.sim_config(s.levels);
    cfg.log_events = log_events;
    let (r, bulk): (SimResult, Option<&BulkModel>) = match model {
        Model::Chain(_) => return Err(CliError::invalid("simulation needs a bmap-queue or bulk-queue model")),
        Model::Queue(m, _) => (simulate_bmap_queue(m, &cfg)?, None),
        Model::Bulk(m) => (simulate_bulk_queue(m, &cfg)?, Some(m)),
    };
    let mut table =
        Table::new(&["level", "phase", "time_probability", "time_se", "departure_probability", "departure_se"]);
    let mut plot = Vec::new();
    for k in 0..=r.time.max_level {
        for i in 0..r.time.phases {
            table.push(vec![
                k.into(),
                i.into(),
                r.time.prob(k, i).into(),
                r.time.cell_std_error(k, i).into(),
                r.departure.prob(k, i).into(),
                r.departure.cell_std_error(k, i).into(),
            ]);
        }
        plot.push((k as f64, r.time.level_prob(k)));
    }
    if log_events > 0 {
        em.emit_text("events.jsonl", &log_lines(&r))?;
    }
    let summary = merge(
        header("simulate", model, s),
        json!({
            "config": r.config,
            "mean_interdeparture": finite(r.mean_interdeparture),
            "mean_interdeparture_se": finite(r.mean_interdeparture_se),
            "rule_violations": r.rule_violations,
            "conservation_failures": r.conservation_failures,
            "bulk_rule": bulk.map(|m| json!({ "a": m.a(), "b": m.b() })),
            "mass_deficit": r.time.level_prob(r.time.max_level),
            "heuristic_flags": { "top_level_pools_overflow": true },
        }),
    );
    em.emit("simulate", Some(&table), summary, Some(&plot))
}
