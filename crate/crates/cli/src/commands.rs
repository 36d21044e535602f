//! Subcommand drivers. Setup errors are tagged as [`ConfigError`] so the
//! binary can tell them apart from failures during the run.

use crate::artifact::{Provenance, Sink};
use crate::config::{
    parse, AlphaConfig, AnnealFileConfig, CoupleConfig, DriftConfig, HarrisConfig, SampleConfig, StateSpec, TorusConfig,
};
use anyhow::{anyhow, Result};
use bouncy::annealing::{success_prob, validate_schedule, AnnealConfig};
use bouncy::bps::{simulate, EventKind, SimConfig};
use bouncy::coupling::{alpha_tilde, couple_batch, merge_lower_bound, reflect_whitened, CouplingScenario};
use bouncy::harris::{bundled_chain, check_contraction, FiniteChain, HarrisConstants};
use bouncy::lyapunov::{
    calibrate, default_r_grid, fit_drift_constants, sample_drift, DriftSampling, LyapunovConfig, LyapunovSpec,
};
use bouncy::par::{map_indexed, Execution};
use bouncy::potentials::PotentialModel;
use bouncy::rng::{ChainSeed, Clock};
use bouncy::stats::mean_se;
use bouncy::torus::{antipodal_merge_times, cell_from_merge_times, scaling_experiment, torus_bound, TorusGeom};
use bouncy::velocity::VelocityLaw;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Invalid or unreadable configuration.
#[derive(Debug)]
pub struct ConfigError(pub anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn setup<T, E: Into<anyhow::Error>>(r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| anyhow::Error::new(ConfigError(e.into())))
}

pub fn setup_fail(msg: String) -> anyhow::Error {
    anyhow::Error::new(ConfigError(anyhow!(msg)))
}

/// Shared run context.
pub struct Ctx {
    pub seed_override: Option<u64>,
    pub exec: Execution,
    pub out: PathBuf,
}

/// Result of a subcommand: a one-line summary and whether its checks held.
pub struct Outcome {
    pub summary: String,
    pub ok: bool,
    pub report: Option<PathBuf>,
}

impl Ctx {
    fn open(&self, command: &str, text: &str, config_seed: Option<u64>) -> Result<(Sink, u64)> {
        let seed = self.seed_override.or(config_seed).unwrap_or(0);
        let sink = Sink::new(&self.out, Provenance::new(command, text, seed))?;
        Ok((sink, seed))
    }
}

pub fn read_config(path: &Path) -> Result<String> {
    setup(std::fs::read_to_string(path).map_err(|e| anyhow!("reading {}: {e}", path.display())))
}

fn model_and_law(
    potential: &bouncy::potentials::PotentialSpec,
    velocity: &bouncy::velocity::VelocitySpec,
) -> Result<(PotentialModel, VelocityLaw)> {
    let model = setup(potential.build())?;
    let law = setup(velocity.build())?;
    if model.dim() != law.dim() {
        return Err(setup_fail(format!("potential has dimension {}, velocity law {}", model.dim(), law.dim())));
    }
    Ok((model, law))
}

fn state(spec: &StateSpec, dim: usize) -> Result<bouncy::bps::KineticState> {
    setup(spec.build(dim))
}

#[derive(Serialize)]
struct MomentRow {
    observable: String,
    estimate: f64,
    se: f64,
}

#[derive(Serialize)]
struct EventRow {
    time: f64,
    kind: EventKind,
    x: Vec<f64>,
    y: Vec<f64>,
}

pub fn sample(ctx: &Ctx, text: &str) -> Result<Outcome> {
    let c: SampleConfig = setup(parse(text))?;
    let (model, law) = model_and_law(&c.potential, &c.velocity)?;
    let init = state(&c.initial, model.dim())?;
    let sim = SimConfig::new(c.refresh_rate, c.horizon);
    setup(sim.validate())?;
    if c.replicas == 0 || c.batches < 2 {
        return Err(setup_fail("need at least one replica and two batches".into()));
    }
    let (sink, seed) = ctx.open("sample", text, c.seed)?;
    let trajs = map_indexed(c.replicas, ctx.exec, |i| simulate(&model, &law, &sim, &init, &ChainSeed::new(seed, i as u64)))
        .into_iter()
        .collect::<bouncy::Result<Vec<_>>>()?;

    let d = model.dim();
    let mut observables: Vec<(String, Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Sync>)> = Vec::new();
    for i in 0..d {
        observables.push((format!("x{}", i + 1), Box::new(move |x, _| x[i])));
        observables.push((format!("x{}^2", i + 1), Box::new(move |x, _| x[i] * x[i])));
    }
    observables.push(("|y|^2".into(), Box::new(|_, y| y.norm_squared())));
    let rows: Vec<MomentRow> = observables
        .iter()
        .map(|(name, g)| {
            let (estimate, se) = if trajs.len() == 1 {
                trajs[0].batch_means(g, 4, c.batches)
            } else {
                let avgs: Vec<f64> = trajs.iter().map(|t| t.time_average(g, 4)).collect();
                mean_se(&avgs)
            };
            MomentRow { observable: name.clone(), estimate, se }
        })
        .collect();
    let path = sink.csv("moments.csv", &rows)?;
    if c.write_events {
        let events: Vec<EventRow> = trajs[0]
            .events()
            .iter()
            .map(|e| EventRow { time: e.time, kind: e.kind, x: e.position.iter().copied().collect(), y: e.velocity_after.iter().copied().collect() })
            .collect();
        sink.jsonl("events.jsonl", &events)?;
    }
    let bounces: usize = trajs.iter().map(|t| t.count(EventKind::Bounce)).sum();
    let refreshes: usize = trajs.iter().map(|t| t.count(EventKind::Refresh)).sum();
    Ok(Outcome {
        summary: format!(
            "sample: {} replica(s), {bounces} bounces, {refreshes} refreshes, x1 = {:.4} ± {:.4} -> {}",
            c.replicas,
            rows[0].estimate,
            rows[0].se,
            path.display()
        ),
        ok: true,
        report: None,
    })
}

#[derive(Serialize)]
struct DriftRow {
    radius: f64,
    log_v: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct DriftReport {
    constants: bouncy::lyapunov::DriftConstants,
    radius: f64,
    params: bouncy::lyapunov::DerivedParams,
    samples: usize,
    a1: f64,
    a2: f64,
    feasible: bool,
    violations: usize,
}

pub fn drift_check(ctx: &Ctx, text: &str) -> Result<Outcome> {
    let c: DriftConfig = setup(parse(text))?;
    let (model, law) = model_and_law(&c.potential, &c.velocity)?;
    let r_grid = c.r_grid.clone().unwrap_or_else(|| default_r_grid(&law));
    let scan = c.scan.clone().unwrap_or_default();
    let (sink, seed) = ctx.open("drift-check", text, c.seed)?;
    let cal = calibrate(&model, &law, c.psi, c.h, c.ell, c.refresh_rate, &r_grid, &scan)?;
    let config = LyapunovConfig { psi: c.psi, h: c.h, ell: c.ell, form: c.form, constants: cal.constants, radius: cal.radius };
    let spec = LyapunovSpec::new(config, c.refresh_rate)?;
    let ev = spec.drift_evaluator(&model, &law)?;
    let sampling = DriftSampling::annuli(c.max_radius, c.annuli, c.per_annulus);
    let samples = sample_drift(&ev, &sampling, &ChainSeed::new(seed, 0), ctx.exec)?;
    let values: Vec<_> = samples.iter().map(|s| s.value).collect();
    let max_v = values.iter().map(|v| v.v()).fold(0.0, f64::max);
    let fit = fit_drift_constants(&values, c.a2_cap_factor * max_v)?;
    let rows: Vec<DriftRow> =
        samples.iter().map(|s| DriftRow { radius: s.radius(), log_v: s.value.log_v, ratio: s.value.ratio }).collect();
    sink.csv("drift_samples.csv", &rows)?;
    let ok = fit.feasible && fit.violations.is_empty();
    let report = DriftReport {
        constants: cal.constants,
        radius: cal.radius,
        params: cal.params,
        samples: rows.len(),
        a1: fit.a1,
        a2: fit.a2,
        feasible: fit.feasible,
        violations: fit.violations.len(),
    };
    let path = sink.json("drift_report.json", &report)?;
    Ok(Outcome {
        summary: format!(
            "drift-check: R = {:.3e}, A1 = {:.3e}, A2 = {:.3e}, {} violation(s) over {} samples",
            cal.radius,
            fit.a1,
            fit.a2,
            fit.violations.len(),
            rows.len()
        ),
        ok,
        report: Some(path),
    })
}

#[derive(Serialize)]
struct CoupleRow {
    horizon: f64,
    runs: usize,
    merged: usize,
    merge_rate: f64,
    merge_se: f64,
    bound: f64,
    bound_se: f64,
    /// bound ≤ merge rate + 3 pooled standard errors
    consistent: bool,
}

pub fn couple(ctx: &Ctx, text: &str) -> Result<Outcome> {
    let c: CoupleConfig = setup(parse(text))?;
    let (model, law) = model_and_law(&c.potential, &c.velocity)?;
    let VelocityLaw::Gaussian(sigma) = law else {
        return Err(setup_fail("the coupling needs a Gaussian velocity law".into()));
    };
    let d = model.dim();
    let initial = [state(&c.first, d)?, state(&c.second, d)?];
    if c.horizons.is_empty() || c.runs == 0 || c.bound_samples == 0 {
        return Err(setup_fail("need horizons, runs and bound_samples".into()));
    }
    let mut scenarios = Vec::with_capacity(c.horizons.len());
    for &h in &c.horizons {
        let mut sc = setup(CouplingScenario::new(model.clone(), sigma.clone(), c.refresh_rate, initial.clone(), c.compact_radius, h))?;
        if let Some(m) = c.tail_cutoff {
            sc = setup(sc.with_tail_cutoff(m))?;
        }
        scenarios.push(sc);
    }
    let (sink, seed) = ctx.open("couple", text, c.seed)?;
    let mut rows = Vec::new();
    for sc in &scenarios {
        let batch = couple_batch(sc, c.runs, seed, ctx.exec)?;
        let merged = batch.iter().filter(|r| r.report.merged).count();
        let p = merged as f64 / c.runs as f64;
        let merge_se = (p * (1.0 - p) / c.runs as f64).sqrt();
        let b = merge_lower_bound(sc, c.bound_samples, seed.wrapping_add(1), ctx.exec)?;
        let pooled = (merge_se.powi(2) + b.best.se.powi(2)).sqrt();
        rows.push(CoupleRow {
            horizon: sc.horizon,
            runs: c.runs,
            merged,
            merge_rate: p,
            merge_se,
            bound: b.best.bound,
            bound_se: b.best.se,
            consistent: b.best.bound <= p + 3.0 * pooled,
        });
    }
    let path = sink.csv("couple.csv", &rows)?;
    let ok = rows.iter().all(|r| r.consistent);
    let last = rows.last().expect("non-empty horizons");
    Ok(Outcome {
        summary: format!(
            "couple: {} horizon(s), at t = {} merge rate {:.4} vs bound {:.3e} -> {}",
            rows.len(),
            last.horizon,
            last.merge_rate,
            last.bound,
            path.display()
        ),
        ok,
        report: Some(path),
    })
}

#[derive(Serialize)]
struct TorusRow {
    t: f64,
    runs: usize,
    merged: usize,
    tv_upper: f64,
    tv_se: f64,
    bound: f64,
    bound_se: f64,
    clock_bound: f64,
    clock_se: f64,
}

#[derive(Serialize)]
struct ScalingOut {
    dim: usize,
    t_c: Option<f64>,
}

#[derive(Serialize)]
struct TorusReport {
    dim: usize,
    eta: f64,
    refresh_rate: f64,
    /// Horizons where the empirical bound exceeds the displayed bound by 3 SE.
    bound_exceeded: Vec<f64>,
    clock_bound_exceeded: Vec<f64>,
    scaling_exponent: Option<f64>,
}

pub fn torus(ctx: &Ctx, text: &str) -> Result<Outcome> {
    let c: TorusConfig = setup(parse(text))?;
    let geom = setup(TorusGeom::new(c.dim, c.eta))?;
    if c.horizons.is_empty() || c.runs == 0 || c.bound_samples == 0 {
        return Err(setup_fail("need horizons, runs and bound_samples".into()));
    }
    let (sink, seed) = ctx.open("torus", text, c.seed)?;
    let times = antipodal_merge_times(&geom, c.refresh_rate, c.runs, seed, ctx.exec)?;
    let mut rows = Vec::new();
    for &t in &c.horizons {
        let cell = cell_from_merge_times(c.dim, t, &times);
        let b = torus_bound(&geom, c.refresh_rate, t, c.bound_samples, seed.wrapping_add(1))?;
        rows.push(TorusRow {
            t,
            runs: cell.runs,
            merged: cell.merged,
            tv_upper: cell.tv_upper,
            tv_se: cell.tv_se,
            bound: b.bound,
            bound_se: b.se,
            clock_bound: b.clock_bound,
            clock_se: b.clock_se,
        });
    }
    sink.csv("torus.csv", &rows)?;
    let exceeded = |bound: fn(&TorusRow) -> (f64, f64)| -> Vec<f64> {
        rows.iter()
            .filter(|r| {
                let (b, se) = bound(r);
                r.tv_upper > b + 3.0 * (se.powi(2) + r.tv_se.powi(2)).sqrt()
            })
            .map(|r| r.t)
            .collect()
    };
    let bound_exceeded = exceeded(|r| (r.bound, r.bound_se));
    let clock_bound_exceeded = exceeded(|r| (r.clock_bound, r.clock_se));
    let mut scaling_exponent = None;
    if let Some(s) = &c.scaling {
        let report = scaling_experiment(c.eta, c.refresh_rate, &s.dims, s.epsilon, s.runs, s.t_cap, seed.wrapping_add(2), ctx.exec)?;
        let out: Vec<ScalingOut> = report.rows.iter().map(|r| ScalingOut { dim: r.dim, t_c: r.t_c }).collect();
        sink.csv("scaling.csv", &out)?;
        scaling_exponent = report.exponent;
    }
    let ok = clock_bound_exceeded.is_empty();
    let report = TorusReport {
        dim: c.dim,
        eta: c.eta,
        refresh_rate: c.refresh_rate,
        bound_exceeded,
        clock_bound_exceeded,
        scaling_exponent,
    };
    let path = sink.json("torus_report.json", &report)?;
    Ok(Outcome {
        summary: format!(
            "torus: {} horizon(s), displayed bound exceeded at {:?}, clock bound exceeded at {:?}, exponent {:?}",
            rows.len(),
            report.bound_exceeded,
            report.clock_bound_exceeded,
            report.scaling_exponent
        ),
        ok,
        report: Some(path),
    })
}

#[derive(Serialize)]
struct RunRecord {
    horizon: f64,
    seed: u64,
    replica: u64,
    #[serde(rename = "U_final")]
    u_final: f64,
    success: bool,
}

#[derive(Serialize)]
struct AnnealRow {
    horizon: f64,
    runs: usize,
    successes: usize,
    fraction: f64,
    ci_lo: f64,
    ci_hi: f64,
    min_u: f64,
}

pub fn anneal(ctx: &Ctx, text: &str) -> Result<Outcome> {
    let c: AnnealFileConfig = setup(parse(text))?;
    let (model, law) = model_and_law(&c.potential, &c.velocity)?;
    let init = state(&c.initial, model.dim())?;
    if c.horizons.is_empty() || c.runs == 0 {
        return Err(setup_fail("need horizons and runs".into()));
    }
    let configs = c
        .horizons
        .iter()
        .map(|&h| {
            let config = AnnealConfig {
                model: model.clone(),
                law: law.clone(),
                schedule: c.schedule.clone(),
                sim: SimConfig::new(c.refresh_rate, h),
                eta: c.eta,
            };
            setup(config.validate()).map(|_| config)
        })
        .collect::<Result<Vec<_>>>()?;
    let (sink, seed) = ctx.open("anneal", text, c.seed)?;
    let top = c.horizons.iter().copied().fold(0.0, f64::max);
    let schedule_report = validate_schedule(&c.schedule, top);
    sink.json("schedule.json", &schedule_report)?;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for config in &configs {
        let r = success_prob(config, &init, c.runs, seed, ctx.exec)?;
        records.extend(r.records.iter().map(|a| RunRecord {
            horizon: r.horizon,
            seed: a.seed_base,
            replica: a.seed_index,
            u_final: a.u_final,
            success: a.success,
        }));
        rows.push(AnnealRow {
            horizon: r.horizon,
            runs: r.runs,
            successes: r.successes,
            fraction: r.fraction,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            min_u: r.min_u,
        });
    }
    sink.jsonl("runs.jsonl", &records)?;
    let path = sink.csv("anneal_summary.csv", &rows)?;
    let fractions: Vec<String> = rows.iter().map(|r| format!("{}: {:.3}", r.horizon, r.fraction)).collect();
    Ok(Outcome {
        summary: format!(
            "anneal: success fraction by horizon [{}], schedule {} -> {}",
            fractions.join(", "),
            if schedule_report.pass() { "certified" } else { "not certified" },
            path.display()
        ),
        ok: true,
        report: None,
    })
}

#[derive(Serialize)]
struct HarrisOut {
    alpha: f64,
    gamma: f64,
    #[serde(rename = "C1")]
    c1: f64,
    #[serde(rename = "C2")]
    c2: f64,
    zeta: Option<f64>,
    kappa: Option<f64>,
    worst_ratio: Option<f64>,
    trials: usize,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<String>,
}

pub fn harris(ctx: &Ctx, text: &str) -> Result<Outcome> {
    let c: HarrisConfig = setup(parse(text))?;
    let (chain, constants) = match &c.chain {
        None => bundled_chain(),
        Some(s) => {
            let n = s.kernel.len();
            if n == 0 || s.kernel.iter().any(|row| row.len() != n) || s.weights.len() != n {
                return Err(setup_fail("kernel must be square and match the weights".into()));
            }
            let q = DMatrix::from_fn(n, n, |i, j| s.kernel[i][j]);
            let chain = setup(FiniteChain::new(q, DVector::from_vec(s.weights.clone())))?;
            (chain, setup(HarrisConstants::new(s.alpha, s.gamma, s.c1, s.c2))?)
        }
    };
    let (sink, seed) = ctx.open("harris", text, c.seed)?;
    let mut out = HarrisOut {
        alpha: constants.alpha,
        gamma: constants.gamma,
        c1: constants.c1,
        c2: constants.c2,
        zeta: None,
        kappa: None,
        worst_ratio: None,
        trials: c.trials,
        pass: false,
        diagnostic: None,
    };
    match check_contraction(&chain, &constants, c.trials, seed) {
        Ok(r) => {
            out.zeta = Some(r.zeta);
            out.kappa = Some(r.kappa);
            out.worst_ratio = Some(r.worst_ratio);
            out.trials = r.trials;
            out.pass = r.pass;
        }
        Err(bouncy::Error::Hypotheses(d)) => out.diagnostic = Some(d),
        Err(e) => return Err(e.into()),
    }
    let path = sink.json("harris.json", &out)?;
    let summary = match (out.kappa, out.worst_ratio) {
        (Some(k), Some(w)) => format!("harris: zeta = {}, kappa = {k}, worst ratio {w:.6}, pass = {}", out.zeta.unwrap_or(0.0), out.pass),
        _ => "harris: contraction hypotheses fail".to_string(),
    };
    Ok(Outcome { summary, ok: out.pass, report: Some(path) })
}

#[derive(Serialize)]
struct AlphaRow {
    dim: usize,
    r: f64,
    m: f64,
    alpha_tilde: f64,
    mc: Option<f64>,
    mc_se: Option<f64>,
}

pub fn alpha(ctx: &Ctx, text: &str) -> Result<Outcome> {
    let c: AlphaConfig = setup(parse(text))?;
    if c.dim == 0 || c.r.is_empty() || c.m.is_empty() {
        return Err(setup_fail("need dim ≥ 1 and non-empty r and m grids".into()));
    }
    let cells: Vec<(f64, f64)> = c.r.iter().flat_map(|&r| c.m.iter().map(move |&m| (r, m))).collect();
    let values = cells.iter().map(|&(r, m)| alpha_tilde(r, m, c.dim)).collect::<bouncy::Result<Vec<_>>>();
    let values = setup(values)?;
    let (sink, seed) = ctx.open("alpha-tilde", text, c.seed)?;
    let dim = c.dim;
    let draws = c.mc_draws;
    let rows = map_indexed(cells.len(), ctx.exec, |k| {
        let (r, m) = cells[k];
        let (mc, mc_se) = if draws == 0 {
            (None, None)
        } else {
            let mut rng = ChainSeed::new(seed, k as u64).stream(Clock::Coupling);
            let mut z = DVector::zeros(dim);
            z[0] = r;
            let hits = (0..draws)
                .filter(|_| {
                    let p = reflect_whitened(&z, &mut rng);
                    p.merged && (&p.g1 - &z * 0.5).norm() <= m
                })
                .count();
            let p = hits as f64 / draws as f64;
            (Some(p), Some((p * (1.0 - p) / draws as f64).sqrt()))
        };
        AlphaRow { dim, r, m, alpha_tilde: values[k], mc, mc_se }
    });
    let path = sink.csv("alpha_tilde.csv", &rows)?;
    let off = rows
        .iter()
        .filter(|row| match (row.mc, row.mc_se) {
            (Some(p), Some(_)) => {
                let se = (row.alpha_tilde * (1.0 - row.alpha_tilde) / draws as f64).sqrt();
                (p - row.alpha_tilde).abs() > 4.0 * se.max(1.0 / draws as f64)
            }
            _ => false,
        })
        .count();
    Ok(Outcome {
        summary: format!("alpha-tilde: {} cell(s), {off} outside 4 SE of Monte Carlo -> {}", rows.len(), path.display()),
        ok: true,
        report: None,
    })
}

/// Checks an anyhow chain for a configuration failure.
pub fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.is::<ConfigError>())
}
