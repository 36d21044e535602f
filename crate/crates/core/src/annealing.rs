//! Simulated annealing with the Bouncy Particle Sampler.
//!
//! The bounce intensity at absolute time t is β(t)⟨y, ∇U(x)⟩₊ for a
//! nondecreasing cooling schedule β, so the process tracks exp(−β(t)U) ⊗ μ_v
//! and concentrates near the global minima of U as β grows.

use crate::bps::{first_arrival, reflect, Event, EventKind, KineticState, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::potentials::PotentialModel;
use crate::rng::{ChainSeed, ChainStreams};
use crate::stats::wilson_interval;
use crate::velocity::VelocityLaw;
use nalgebra::DVector;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

/// Wilson interval level used by [`success_prob`].
const WILSON_Z: f64 = 1.96;

/// Shape of a cooling schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleForm {
    /// β(t) = β₀ ∨ D₂ ln(e + t).
    Log { beta0: f64, d2: f64 },
    /// β(t) = betas[k] on [times[k], times[k+1]), right-continuous; times[0] = 0.
    Table { times: Vec<f64>, betas: Vec<f64> },
}

/// A cooling schedule together with the window s₀ used for the increment bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingSchedule {
    pub form: ScheduleForm,
    #[serde(default = "default_s0")]
    pub s0: f64,
}

fn default_s0() -> f64 {
    1.0
}

impl CoolingSchedule {
    pub fn log(beta0: f64, d2: f64) -> Result<Self> {
        let s = CoolingSchedule { form: ScheduleForm::Log { beta0, d2 }, s0: default_s0() };
        s.validate()?;
        Ok(s)
    }

    pub fn table(times: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let s = CoolingSchedule { form: ScheduleForm::Table { times, betas }, s0: default_s0() };
        s.validate()?;
        Ok(s)
    }

    /// β ≡ β₀, the frozen-temperature special case.
    pub fn constant(beta0: f64) -> Result<Self> {
        Self::table(vec![0.0], vec![beta0])
    }

    /// Structural checks needed by the simulator: β(0) ≥ 1 and β nondecreasing.
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0) {
            return Err(Error::InvalidParameter(format!("s₀ must be positive, got {}", self.s0)));
        }
        match &self.form {
            ScheduleForm::Log { beta0, d2 } => {
                if !(*beta0 >= 1.0) || !(*d2 > 0.0) || !d2.is_finite() || !beta0.is_finite() {
                    return Err(Error::InvalidParameter(format!("need β₀ ≥ 1 and D₂ > 0, got β₀ = {beta0}, D₂ = {d2}")));
                }
            }
            ScheduleForm::Table { times, betas } => {
                if times.is_empty() || times.len() != betas.len() {
                    return Err(Error::InvalidParameter("table needs matching, non-empty times and betas".into()));
                }
                if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter("table times must start at 0 and increase".into()));
                }
                if betas.iter().any(|b| !b.is_finite()) || !(betas[0] >= 1.0) {
                    return Err(Error::InvalidParameter("table needs finite betas with β(0) ≥ 1".into()));
                }
                if betas.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidParameter("table betas must be nondecreasing".into()));
                }
            }
        }
        Ok(())
    }

    /// β(t) for t ≥ 0.
    pub fn beta_at(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.form {
            ScheduleForm::Log { beta0, d2 } => beta0.max(d2 * (E + t).ln()),
            ScheduleForm::Table { times, betas } => {
                let k = times.partition_point(|&s| s <= t);
                betas[k.max(1) - 1]
            }
        }
    }
}

/// Certified growth constants: β(t) ≥ D₂ ln t and β(t + s₀) − β(t) ≤ D₁/t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub d1: f64,
    pub d2: f64,
    pub s0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub certified: Option<GrowthConstants>,
    pub violations: Vec<String>,
}

impl ScheduleReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

const GRID_POINTS: usize = 1000;
/// Decades past the horizon over which divergence is probed.
const DIVERGENCE_DECADES: i32 = 6;

/// Grid check of the cooling-schedule growth conditions on [0, horizon].
///
/// For the log form the candidate constants are (D₂s₀, D₂, s₀), since
/// D₂ ln((e + t + s₀)/(e + t)) ≤ D₂s₀/t. Tables carry no growth constants and
/// are eventually constant, so they never certify.
pub fn validate_schedule(schedule: &CoolingSchedule, horizon: f64) -> ScheduleReport {
    let mut violations = Vec::new();
    if let Err(e) = schedule.validate() {
        violations.push(e.to_string());
        return ScheduleReport { certified: None, violations };
    }
    if !(horizon > 1.0) {
        violations.push(format!("horizon {horizon} leaves no room for the growth checks"));
        return ScheduleReport { certified: None, violations };
    }
    let beta = |t: f64| schedule.beta_at(t);
    if beta(0.0) < 1.0 {
        violations.push(format!("β(0) = {} < 1", beta(0.0)));
    }
    // log-spaced grid on [1, horizon] plus t = 0
    let grid: Vec<f64> = std::iter::once(0.0)
        .chain((0..GRID_POINTS).map(|k| horizon.powf(k as f64 / (GRID_POINTS - 1) as f64)))
        .collect();
    if let Some(w) = grid.windows(2).find(|w| beta(w[1]) < beta(w[0])) {
        violations.push(format!("β decreases between t = {} and t = {}", w[0], w[1]));
    }
    let top = beta(horizon);
    if (1..=DIVERGENCE_DECADES).any(|k| beta(horizon * 10f64.powi(k)) <= top) {
        violations.push("β does not keep growing past the horizon".into());
    }
    let candidate = match schedule.form {
        ScheduleForm::Log { d2, .. } => Some(GrowthConstants { d1: d2 * schedule.s0, d2, s0: schedule.s0 }),
        ScheduleForm::Table { .. } => None,
    };
    if let Some(c) = candidate {
        if c.d1 < c.d2 {
            violations.push(format!("D₁ = {} < D₂ = {}; take s₀ ≥ 1", c.d1, c.d2));
        }
        for &t in grid.iter().filter(|&&t| t >= 1.0) {
            if beta(t) < c.d2 * t.ln() {
                violations.push(format!("β({t}) below D₂ ln t"));
                break;
            }
            let inc = beta(t + c.s0) - beta(t);
            if inc > c.d1 / t * (1.0 + 1e-12) {
                violations.push(format!("increment {inc} over [{t}, {t} + s₀] exceeds D₁/t"));
                break;
            }
        }
    }
    let certified = if violations.is_empty() { candidate } else { None };
    ScheduleReport { certified, violations }
}

/// One annealing experiment.
#[derive(Debug, Clone)]
pub struct AnnealConfig {
    pub model: PotentialModel,
    pub law: VelocityLaw,
    pub schedule: CoolingSchedule,
    /// Refresh rate, horizon and thinning parameters.
    pub sim: SimConfig,
    /// Success level: U(X_T) ≤ min U + η.
    pub eta: f64,
}

impl AnnealConfig {
    /// Requires a bounded rotation-invariant velocity law, a bounded Hessian
    /// and a positive refresh rate.
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.schedule.validate()?;
        crate::error::check_dim(self.model.dim(), self.law.dim())?;
        if !matches!(self.law, VelocityLaw::UniformBall { .. } | VelocityLaw::UniformSphere { .. }) {
            return Err(Error::Unsupported("annealing needs a uniform ball or sphere velocity law".into()));
        }
        if !self.model.hessian_norm_sup(f64::INFINITY).is_finite() {
            return Err(Error::Unsupported("annealing needs a potential with bounded Hessian".into()));
        }
        if !(self.sim.refresh_rate > 0.0) || !(self.eta > 0.0) {
            return Err(Error::InvalidParameter("need a positive refresh rate and η > 0".into()));
        }
        Ok(())
    }
}

/// Annealed trajectory on [0, horizon]: the competing-clocks construction
/// with bounce rate β(t)⟨y, ∇U⟩₊. Thinning windows are bounded with β at the
/// right endpoint, which dominates on the window because β is nondecreasing.
pub fn simulate_annealed(config: &AnnealConfig, initial: &KineticState, seed: &ChainSeed) -> Result<Trajectory> {
    config.validate()?;
    crate::error::check_dim(config.model.dim(), initial.x.len())?;
    crate::error::check_dim(config.model.dim(), initial.y.len())?;
    let (model, sim) = (&config.model, &config.sim);
    let mut streams = ChainStreams::new(seed);
    let mut x = initial.x.clone();
    let mut y = initial.y.clone();
    let mut t = 0.0;
    let mut events = Vec::new();
    loop {
        if events.len() >= sim.event_cap {
            return Err(Error::Runaway { cap: sim.event_cap, time: t });
        }
        let remaining = sim.horizon - t;
        let e: f64 = Exp1.sample(&mut streams.refresh);
        let refresh_in = e / sim.refresh_rate;
        let budget = refresh_in.min(remaining);
        let bounce_in = if matches!(model, PotentialModel::Zero { .. }) {
            None
        } else {
            let (xs, ys, t0) = (&x, &y, t);
            first_arrival(
                &mut streams.bounce,
                budget,
                sim.thinning_step,
                sim.thinning_step_max,
                |s| config.schedule.beta_at(t0 + s) * model.bounce_rate(&(xs + ys * s), ys),
                |s, w| Ok(config.schedule.beta_at(t0 + s + w) * model.segment_rate_bound(&(xs + ys * s), ys, w)?),
            )?
        };
        match bounce_in {
            Some(s) => {
                x.axpy(s, &y, 1.0);
                t += s;
                y = reflect(&model.grad(&x), &y);
                events.push(Event { time: t, kind: EventKind::Bounce, position: x.clone(), velocity_after: y.clone() });
            }
            None if refresh_in < remaining => {
                x.axpy(refresh_in, &y, 1.0);
                t += refresh_in;
                y = config.law.sample(&mut streams.velocity);
                events.push(Event { time: t, kind: EventKind::Refresh, position: x.clone(), velocity_after: y.clone() });
            }
            None => break,
        }
    }
    Ok(Trajectory::new(initial.clone(), events, sim.horizon, Some(*seed)))
}

/// Minimum of a unimodal f on [a, b] by golden-section search to width `tol`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Global minimiser and minimum of U for catalog members where it is known.
///
/// Convex catalog members attain their minimum at the origin. For the double
/// well each well is bracketed on one side of the barrier at 0 and refined by
/// golden-section search to a bracket of width 1e−10.
pub fn global_minimum(model: &PotentialModel) -> Result<(DVector<f64>, f64)> {
    match model {
        PotentialModel::Zero { .. } | PotentialModel::Gaussian(_) | PotentialModel::AnisoPower { .. } => {
            let x = DVector::zeros(model.dim());
            let u = model.energy(&x);
            Ok((x, u))
        }
        PotentialModel::DoubleWell1D { tilt } => {
            let u = |v: f64| model.energy(&DVector::from_element(1, v));
            // |∇U| ≥ |2v| − 8/|v|³·… − |tilt| keeps the minima inside |v| ≤ 2 + |tilt|
            let edge = 2.0 + tilt.abs();
            let left = golden_section(u, -edge, 0.0, 1e-10);
            let right = golden_section(u, 0.0, edge, 1e-10);
            let (x, m) = if left.1 <= right.1 { left } else { right };
            Ok((DVector::from_element(1, x), m))
        }
        _ => Err(Error::Unsupported("global minimum is only known for convex catalog members and the double well".into())),
    }
}

/// Outcome of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealRun {
    pub seed_base: u64,
    pub seed_index: u64,
    pub u_final: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub horizon: f64,
    pub min_u: f64,
    pub successes: usize,
    pub runs: usize,
    pub fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub records: Vec<AnnealRun>,
}

impl SuccessReport {
    pub fn failure(&self) -> f64 {
        1.0 - self.fraction
    }

    /// Wilson interval of the failure fraction.
    pub fn failure_ci(&self) -> (f64, f64) {
        (1.0 - self.ci_hi, 1.0 - self.ci_lo)
    }
}

/// Fraction of `runs` replicas from `initial` with U(X_T) ≤ min U + η, with a
/// 95% Wilson interval. Replica k uses ChainSeed::new(base, k).
pub fn success_prob(
    config: &AnnealConfig,
    initial: &KineticState,
    runs: usize,
    base: u64,
    exec: Execution,
) -> Result<SuccessReport> {
    config.validate()?;
    if runs == 0 {
        return Err(Error::EmptyInput);
    }
    let (_, min_u) = global_minimum(&config.model)?;
    let records = map_indexed(runs, exec, |k| -> Result<AnnealRun> {
        let seed = ChainSeed::new(base, k as u64);
        let traj = simulate_annealed(config, initial, &seed)?;
        let u_final = config.model.energy(&traj.final_state().x);
        Ok(AnnealRun { seed_base: base, seed_index: k as u64, u_final, success: u_final <= min_u + config.eta })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let successes = records.iter().filter(|r| r.success).count();
    let (ci_lo, ci_hi) = wilson_interval(successes, runs, WILSON_Z)?;
    Ok(SuccessReport {
        horizon: config.sim.horizon,
        min_u,
        successes,
        runs,
        fraction: successes as f64 / runs as f64,
        ci_lo,
        ci_hi,
        records,
    })
}

/// φ₂(s): 1 for s ≤ −1, 3 for s ≥ 1, a C¹ cubic in between.
fn phi2(s: f64) -> f64 {
    let s = s.clamp(-1.0, 1.0);
    2.0 + 0.5 * (3.0 * s - s * s * s)
}

fn phi2_prime(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        1.5 * (1.0 - s * s)
    }
}

/// A_βV₂/V₂ at (x, y) for V₂(x, y) = e^{U(x)/2}φ₂(⟨y, ∇U(x)⟩), evaluated exactly
/// (the refresh term by quadrature over the velocity law).
pub fn v2_drift_ratio(model: &PotentialModel, law: &VelocityLaw, refresh_rate: f64, beta: f64, state: &KineticState) -> f64 {
    let g = model.grad(&state.x);
    let y = &state.y;
    let theta = y.dot(&g);
    let curvature = (model.hessian(&state.x) * y).dot(y);
    let transport = 0.5 * theta * phi2(theta) + phi2_prime(theta) * curvature;
    let bounce = beta * theta.max(0.0) * (phi2(-theta) - phi2(theta));
    let refresh = refresh_rate * (law.projected_expectation(&g, phi2, &[-1.0, 1.0]) - phi2(theta));
    (transport + bounce + refresh) / phi2(theta)
}

/// 3 + M²‖∇²U‖_∞‖φ₂′‖_∞ + 2λ_r, a β-free constant with A_βV₂ ≤ A₃V₂ for β ≥ 1.
pub fn v2_drift_constant(model: &PotentialModel, law: &VelocityLaw, refresh_rate: f64) -> f64 {
    let m = law.speed_bound();
    3.0 + m * m * model.hessian_norm_sup(f64::INFINITY) * 1.5 + 2.0 * refresh_rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bps::simulate;
    use crate::stats::ks_two_sample;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn well_config(schedule: CoolingSchedule, horizon: f64) -> AnnealConfig {
        AnnealConfig {
            model: PotentialModel::double_well(0.3).unwrap(),
            law: VelocityLaw::sphere(1, 1.0).unwrap(),
            schedule,
            sim: SimConfig::new(1.0, horizon),
            eta: 0.3,
        }
    }

    #[test]
    fn log_schedule_values() {
        let s = CoolingSchedule::log(1.0, 0.5).unwrap();
        assert_eq!(s.beta_at(0.0), 1.0);
        assert_eq!(s.beta_at(1e6), 0.5 * (E + 1e6).ln());
        let grid: Vec<f64> = (0..1000).map(|k| k as f64 * 7.3).collect();
        assert!(grid.windows(2).all(|w| s.beta_at(w[1]) >= s.beta_at(w[0])));
        for &t in grid.iter().filter(|&&t| t >= 1.0) {
            assert!(s.beta_at(t + s.s0) - s.beta_at(t) <= 0.5 * s.s0 / t);
        }
    }

    #[test]
    fn table_is_right_continuous() {
        let s = CoolingSchedule::table(vec![0.0, 2.0, 5.0], vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.beta_at(0.0), 1.0);
        assert_eq!(s.beta_at(1.999), 1.0);
        assert_eq!(s.beta_at(2.0), 2.0);
        assert_eq!(s.beta_at(100.0), 4.0);
        assert!(CoolingSchedule::table(vec![0.0, 1.0], vec![2.0, 1.0]).is_err());
        assert!(CoolingSchedule::log(0.5, 1.0).is_err());
    }

    #[test]
    fn schedule_validation() {
        let r = validate_schedule(&CoolingSchedule::log(1.0, 0.8).unwrap(), 1e4);
        assert!(r.pass(), "{:?}", r.violations);
        let c = r.certified.unwrap();
        assert_eq!((c.d1, c.d2, c.s0), (0.8, 0.8, 1.0));
        assert!(!validate_schedule(&CoolingSchedule::constant(2.0).unwrap(), 1e4).pass());
        // a decreasing table is rejected before any grid check
        let bad = CoolingSchedule { form: ScheduleForm::Table { times: vec![0.0, 1.0], betas: vec![3.0, 2.0] }, s0: 1.0 };
        let r = validate_schedule(&bad, 1e4);
        assert!(!r.pass() && r.violations[0].contains("nondecreasing"));
        // s₀ < 1 gives D₁ < D₂
        let short = CoolingSchedule { s0: 0.5, ..CoolingSchedule::log(1.0, 0.8).unwrap() };
        assert!(!validate_schedule(&short, 1e4).pass());
    }

    #[test]
    fn golden_section_finds_double_well_minimum() {
        let model = PotentialModel::double_well(0.3).unwrap();
        let (x, u) = global_minimum(&model).unwrap();
        assert!(x[0] < 0.0);
        // comparisons of U resolve x only to about √ε
        assert!(model.grad(&x)[0].abs() < 1e-6);
        // brute-force scan as an independent check
        let scan = (0..200_001).map(|k| -5.0 + k as f64 * 5e-5).map(|v| model.energy(&DVector::from_element(1, v)));
        let brute = scan.fold(f64::INFINITY, f64::min);
        assert!(u <= brute + 1e-12 && brute - u < 1e-8);
    }

    #[test]
    fn rejects_unbounded_velocities_and_curvature() {
        let mut c = well_config(CoolingSchedule::log(1.0, 1.0).unwrap(), 1.0);
        c.law = VelocityLaw::standard_gaussian(1);
        assert!(matches!(c.validate(), Err(Error::Unsupported(_))));
        let mut c = well_config(CoolingSchedule::log(1.0, 1.0).unwrap(), 1.0);
        c.model = PotentialModel::aniso_power(vec![4.0]).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn frozen_schedule_matches_tempered_target() {
        // β ≡ 2 on U = ‖x‖²/2 is the plain sampler on precision 2I
        let beta = 2.0;
        let config = AnnealConfig {
            model: PotentialModel::standard_gaussian(2),
            law: VelocityLaw::sphere(2, 1.0).unwrap(),
            schedule: CoolingSchedule::constant(beta).unwrap(),
            sim: SimConfig::new(1.0, 3.0),
            eta: 1.0,
        };
        let tempered = PotentialModel::gaussian(DMatrix::identity(2, 2) * beta).unwrap();
        let init = KineticState::from_slices(&[1.5, -0.5], &[0.6, 0.8]);
        let n = 4000;
        let a: Vec<f64> = (0..n)
            .map(|k| simulate_annealed(&config, &init, &ChainSeed::new(1, k)).unwrap().final_state().x[0])
            .collect();
        let b: Vec<f64> = (0..n)
            .map(|k| simulate(&tempered, &config.law, &config.sim, &init, &ChainSeed::new(2, k)).unwrap().final_state().x[0])
            .collect();
        let ks = ks_two_sample(&a, &b).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn zero_potential_ignores_schedule() {
        let mut config = well_config(CoolingSchedule::log(1.0, 3.0).unwrap(), 20.0);
        config.model = PotentialModel::zero(1).unwrap();
        let init = KineticState::from_slices(&[0.0], &[1.0]);
        let seed = ChainSeed::new(3, 0);
        let a = simulate_annealed(&config, &init, &seed).unwrap();
        config.schedule = CoolingSchedule::constant(1.0).unwrap();
        let b = simulate_annealed(&config, &init, &seed).unwrap();
        assert_eq!(a.events(), b.events());
        assert_eq!(a.count(EventKind::Bounce), 0);
    }

    #[test]
    fn events_keep_speed_and_order() {
        let config = well_config(CoolingSchedule::log(1.0, 1.0).unwrap(), 200.0);
        let init = KineticState::from_slices(&[1.0], &[1.0]);
        let traj = simulate_annealed(&config, &init, &ChainSeed::new(4, 0)).unwrap();
        assert!(traj.count(EventKind::Bounce) > 10);
        let mut last = 0.0;
        for e in traj.events() {
            assert!(e.time >= last);
            last = e.time;
            assert!((e.velocity_after.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn start_at_minimum_with_tiny_horizon_always_succeeds() {
        let config = well_config(CoolingSchedule::log(1.0, 1.0).unwrap(), 1e-9);
        let (xmin, _) = global_minimum(&config.model).unwrap();
        let init = KineticState::new(xmin, DVector::from_element(1, 1.0));
        let r = success_prob(&config, &init, 50, 5, Execution::Sequential).unwrap();
        assert_eq!(r.fraction, 1.0);
    }

    #[test]
    fn replicas_do_not_depend_on_execution() {
        let config = well_config(CoolingSchedule::log(1.0, 1.0).unwrap(), 30.0);
        let init = KineticState::from_slices(&[1.0], &[1.0]);
        let a = success_prob(&config, &init, 40, 6, Execution::Sequential).unwrap();
        let b = success_prob(&config, &init, 40, 6, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn v2_drift_is_bounded_uniformly_in_beta() {
        let model = PotentialModel::double_well(0.3).unwrap();
        let law = VelocityLaw::ball(1, 1.5).unwrap();
        let lam = 1.0;
        let cap = v2_drift_constant(&model, &law, lam);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut fitted: f64 = f64::NEG_INFINITY;
        for _ in 0..3000 {
            let state = KineticState::from_slices(&[rng.gen_range(-6.0..6.0)], &[rng.gen_range(-1.5..1.5)]);
            for beta in [1.0, 5.0, 25.0] {
                fitted = fitted.max(v2_drift_ratio(&model, &law, lam, beta, &state));
            }
        }
        assert!(fitted > 0.0 && fitted <= cap, "{fitted} vs {cap}");
    }

    proptest! {
        #[test]
        fn log_schedule_is_monotone(beta0 in 1.0f64..5.0, d2 in 0.01f64..5.0, t in 0.0f64..1e6, dt in 0.0f64..1e3) {
            let s = CoolingSchedule::log(beta0, d2).unwrap();
            prop_assert!(s.beta_at(t + dt) >= s.beta_at(t));
            prop_assert!(s.beta_at(t) >= 1.0);
        }
    }
}
