use super::reflection::reflect_whitened;
use crate::bps::{integrated_rate, invert_integrated_rate, reflect, Event, EventKind, KineticState, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::par::{map_indexed, Execution};
use crate::potentials::PotentialModel;
use crate::rng::{ChainSeed, Clock};
use crate::velocity::{GaussianVel, VelocityLaw};
use nalgebra::DVector;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

/// Two BPS chains with Gaussian refreshment started in a compact set.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingScenario {
    pub model: PotentialModel,
    pub sigma: GaussianVel,
    pub refresh_rate: f64,
    pub initial: [KineticState; 2],
    /// Both starts satisfy ‖x‖ + ‖y‖ ≤ R_K.
    pub compact_radius: f64,
    pub horizon: f64,
    /// Tail cutoff M; `None` lets the bound pick from a grid.
    pub tail_cutoff: Option<f64>,
    pub root_tol: f64,
    pub event_cap: usize,
}

impl CouplingScenario {
    pub fn new(
        model: PotentialModel,
        sigma: GaussianVel,
        refresh_rate: f64,
        initial: [KineticState; 2],
        compact_radius: f64,
        horizon: f64,
    ) -> Result<Self> {
        let sc = CouplingScenario {
            model,
            sigma,
            refresh_rate,
            initial,
            compact_radius,
            horizon,
            tail_cutoff: None,
            root_tol: 1e-10,
            event_cap: 10_000_000,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn with_tail_cutoff(mut self, m: f64) -> Result<Self> {
        if !(m >= 0.0) {
            return Err(Error::InvalidParameter(format!("tail cutoff must be non-negative, got {m}")));
        }
        self.tail_cutoff = Some(m);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.model.dim();
        check_dim(d, self.sigma.cov().nrows())?;
        if !(self.refresh_rate > 0.0) || !(self.horizon >= 0.0) || !(self.compact_radius >= 0.0) {
            return Err(Error::InvalidParameter("need refresh_rate > 0, horizon ≥ 0, R_K ≥ 0".into()));
        }
        for s in &self.initial {
            check_dim(d, s.x.len())?;
            check_dim(d, s.y.len())?;
            let size = s.x.norm() + s.y.norm();
            if !(size <= self.compact_radius * (1.0 + 1e-12)) {
                return Err(Error::InvalidParameter(format!(
                    "initial state with ‖x‖ + ‖y‖ = {size} lies outside R_K = {}",
                    self.compact_radius
                )));
            }
        }
        Ok(())
    }

    pub fn law(&self) -> VelocityLaw {
        VelocityLaw::Gaussian(self.sigma.clone())
    }
}

/// Outcome of one coupled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub merged: bool,
    /// Time from which both chains coincide.
    pub merge_time: Option<f64>,
    /// Some chain bounced between the first two refreshments, spoiling the attempt.
    pub bounce_before_merge: bool,
    /// The reflection coupling of the Gaussian velocities succeeded.
    pub gaussian_merged: bool,
    /// First refreshment time H₁, if before the horizon.
    pub first_refresh: Option<f64>,
    /// Whitened distance fed to the reflection coupling.
    pub reflection_distance: Option<f64>,
    pub seed_base: u64,
    pub seed_index: u64,
}

/// A coupled run with both marginal trajectories.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub report: MergeReport,
    pub first: Trajectory,
    pub second: Trajectory,
}

fn transport(x: &mut DVector<f64>, y: &DVector<f64>, dt: f64) {
    x.axpy(dt, y, 1.0);
}

fn push(events: &mut Vec<Event>, time: f64, kind: EventKind, x: &DVector<f64>, y: &DVector<f64>) {
    events.push(Event { time, kind, position: x.clone(), velocity_after: y.clone() });
}

/// Runs the two-chain coupling up to the scenario horizon.
///
/// Both chains share the refreshment times E_i/λ_r and, on each segment
/// between refreshments, one exponential bounce budget. A chain that bounces
/// draws its next budget from its own stream while the other keeps its
/// residual, so each chain sees its own bounce rate. At the first refreshment
/// the velocities come from the reflection coupling with
/// Σ_R^{1/2} = (E₂/λ_r)Σ^{1/2}, so that without bounces the positions meet at
/// the second refreshment; later refreshments share one draw of μ_v. Once the
/// positions meet the second chain is glued to the first.
pub fn mirror_couple(sc: &CouplingScenario, seed: &ChainSeed) -> Result<CoupledRun> {
    sc.validate()?;
    let model = &sc.model;
    let law = sc.law();
    let lam = sc.refresh_rate;
    let mut refresh = seed.stream(Clock::Refresh);
    let mut bounce = seed.stream(Clock::Bounce);
    let mut velocity = seed.stream(Clock::Velocity);
    let mut coupling = seed.stream(Clock::Coupling);
    let mut own = [seed.stream(Clock::Aux(10)), seed.stream(Clock::Aux(11))];

    let [s1, s2] = &sc.initial;
    let (mut x1, mut y1) = (s1.x.clone(), s1.y.clone());
    let (mut x2, mut y2) = (s2.x.clone(), s2.y.clone());
    let (mut ev1, mut ev2) = (Vec::new(), Vec::new());
    let mut glued = s1 == s2;
    let mut merge_time = glued.then_some(0.0);
    let mut t = 0.0;
    let mut refreshes = 0usize;
    let e1: f64 = Exp1.sample(&mut refresh);
    let mut next_refresh = e1 / lam;
    let shared: f64 = Exp1.sample(&mut bounce);
    let mut budget = [shared, shared];
    let mut first_refresh = None;
    let mut reflection_distance = None;
    let (mut gaussian_merged, mut phase2_bounce) = (false, false);

    loop {
        if ev1.len() + ev2.len() >= sc.event_cap {
            return Err(Error::Runaway { cap: sc.event_cap, time: t });
        }
        let window = next_refresh.min(sc.horizon) - t;
        let tau1 = invert_integrated_rate(model, &x1, &y1, budget[0], window, sc.root_tol);
        let tau2 = if glued { None } else { invert_integrated_rate(model, &x2, &y2, budget[1], window, sc.root_tol) };
        let first = match (tau1, tau2) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let Some(s) = first {
            t += s;
            let hit = [tau1 == Some(s), tau2 == Some(s)];
            for (i, (x, y)) in [(&x1, &y1), (&x2, &y2)].into_iter().enumerate() {
                budget[i] = if hit[i] { Exp1.sample(&mut own[i]) } else { (budget[i] - integrated_rate(model, x, y, s)).max(0.0) };
            }
            if glued {
                budget[1] = budget[0];
            }
            transport(&mut x1, &y1, s);
            if hit[0] {
                y1 = reflect(&model.grad(&x1), &y1);
                push(&mut ev1, t, EventKind::Bounce, &x1, &y1);
            }
            if glued {
                x2.copy_from(&x1);
                y2.copy_from(&y1);
                push(&mut ev2, t, EventKind::Bounce, &x2, &y2);
            } else {
                transport(&mut x2, &y2, s);
                if hit[1] {
                    y2 = reflect(&model.grad(&x2), &y2);
                    push(&mut ev2, t, EventKind::Bounce, &x2, &y2);
                }
            }
            if refreshes == 1 {
                phase2_bounce = true;
            }
            continue;
        }
        if next_refresh >= sc.horizon {
            break;
        }
        let dt = next_refresh - t;
        transport(&mut x1, &y1, dt);
        transport(&mut x2, &y2, dt);
        t = next_refresh;
        refreshes += 1;
        let e: f64 = Exp1.sample(&mut refresh);
        next_refresh = t + e / lam;
        let shared: f64 = Exp1.sample(&mut bounce);
        budget = [shared, shared];
        if refreshes == 1 {
            first_refresh = Some(t);
        }
        if refreshes == 1 && !glued {
            let scale = e / lam;
            let z = sc.sigma.inv_sqrt() * (&x2 - &x1) / scale;
            reflection_distance = Some(z.norm());
            let pair = reflect_whitened(&z, &mut coupling);
            gaussian_merged = pair.merged;
            y1 = sc.sigma.sqrt() * pair.g1;
            y2 = sc.sigma.sqrt() * pair.g2;
        } else {
            if refreshes == 2 && !glued && gaussian_merged && !phase2_bounce {
                glued = true;
                merge_time = Some(t);
                x2.copy_from(&x1);
            }
            y1 = law.sample(&mut velocity);
            y2.copy_from(&y1);
        }
        push(&mut ev1, t, EventKind::Refresh, &x1, &y1);
        push(&mut ev2, t, EventKind::Refresh, &x2, &y2);
    }

    let report = MergeReport {
        merged: merge_time.is_some(),
        merge_time,
        bounce_before_merge: phase2_bounce,
        gaussian_merged,
        first_refresh,
        reflection_distance,
        seed_base: seed.base,
        seed_index: seed.index,
    };
    Ok(CoupledRun {
        report,
        first: Trajectory::new(s1.clone(), ev1, sc.horizon, Some(*seed)),
        second: Trajectory::new(s2.clone(), ev2, sc.horizon, Some(*seed)),
    })
}

/// `n` independent coupled runs with seeds (base, 0..n).
pub fn couple_batch(sc: &CouplingScenario, n: usize, base: u64, exec: Execution) -> Result<Vec<CoupledRun>> {
    map_indexed(n, exec, |i| mirror_couple(sc, &ChainSeed::new(base, i as u64))).into_iter().collect()
}
