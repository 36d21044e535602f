use super::function::{DriftEvaluator, DriftValue};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng::{ChainSeed, Clock};
use crate::velocity::VelocityLaw;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A sample point (x, y) with V and AV there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: DriftValue,
}

impl DriftSample {
    pub fn radius(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A sample point where AV ≤ A₁(A₂ − V) fails, with the excess of AV/V over the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub log_v: f64,
    pub ratio: f64,
    pub excess: f64,
}

/// Fitted drift constants for AV ≤ A₁(A₂ − V).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub a1: f64,
    pub a2: f64,
    pub feasible: bool,
    /// Offending samples, worst first; empty when feasible.
    pub violations: Vec<Violation>,
}

/// Smallest A₁ > 0 for which AV ≤ A₁(A₂ − V) holds at every sample with
/// A₂ ≤ `a2_cap`, followed by the smallest such A₂ for that A₁.
///
/// Points with V < cap bound A₁ from below, points with V ≥ cap bound it from
/// above. When the two bounds cross the fit is infeasible and the points that
/// fail at the lower bound are reported.
pub fn fit_drift_constants(samples: &[DriftValue], a2_cap: f64) -> Result<DriftFit> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(a2_cap > 0.0) {
        return Err(Error::InvalidParameter(format!("A₂ cap must be positive, got {a2_cap}")));
    }
    let log_cap = a2_cap.ln();
    let mut lower: f64 = 0.0;
    let mut upper = f64::INFINITY;
    for s in samples {
        // cap/V − 1, computed without forming V
        let slack = (log_cap - s.log_v).exp_m1();
        if slack > 0.0 {
            lower = lower.max(s.ratio / slack);
        } else if slack < 0.0 {
            upper = upper.min(s.ratio / slack);
        } else if s.ratio > 0.0 {
            upper = 0.0;
        }
    }
    let a1 = if lower > 0.0 {
        lower
    } else if upper > 0.0 {
        upper.min(1.0)
    } else {
        // no positive rate can work; report against the weakest one
        f64::MIN_POSITIVE
    };
    let tol = 1e-12;
    let feasible = a1 > 0.0 && a1 <= upper * (1.0 + tol);
    if !feasible {
        let mut violations: Vec<Violation> = samples
            .iter()
            .enumerate()
            .filter_map(|(index, s)| {
                let bound = a1 * (log_cap - s.log_v).exp_m1();
                let excess = s.ratio - bound;
                (excess > tol * bound.abs().max(s.ratio.abs())).then_some(Violation { index, log_v: s.log_v, ratio: s.ratio, excess })
            })
            .collect();
        violations.sort_by(|p, q| q.excess.total_cmp(&p.excess));
        return Ok(DriftFit { a1, a2: a2_cap, feasible, violations });
    }
    // A₂ = max V(1 + (AV/V)/A₁), kept in (0, cap]
    let a2 = samples
        .iter()
        .map(|s| s.v() * (1.0 + s.ratio / a1))
        .fold(f64::MIN_POSITIVE, f64::max)
        .min(a2_cap);
    Ok(DriftFit { a1, a2, feasible, violations: Vec::new() })
}

/// Where drift samples are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSampling {
    pub radii: Vec<f64>,
    pub per_radius: usize,
    /// Fraction of velocities taken from μ_v; the rest sit on the boundary of A_x along ±∇Ū.
    #[serde(default = "default_refresh_share")]
    pub refresh_share: f64,
}

fn default_refresh_share() -> f64 {
    0.5
}

impl DriftSampling {
    /// `count` annuli evenly spaced up to `max_radius`.
    pub fn annuli(max_radius: f64, count: usize, per_radius: usize) -> Self {
        DriftSampling {
            radii: (1..=count).map(|k| max_radius * k as f64 / count as f64).collect(),
            per_radius,
            refresh_share: default_refresh_share(),
        }
    }

    /// Radii R, 2R, 4R, 8R beyond the measuring radius.
    pub fn dyadic(radius: f64, per_radius: usize) -> Self {
        DriftSampling { radii: vec![radius, 2.0 * radius, 4.0 * radius, 8.0 * radius], per_radius, refresh_share: default_refresh_share() }
    }
}

/// Evaluates V and AV on annuli with uniformly distributed directions.
pub fn sample_drift(
    ev: &DriftEvaluator<'_>,
    sampling: &DriftSampling,
    seed: &ChainSeed,
    exec: Execution,
) -> Result<Vec<DriftSample>> {
    let d = ev.model().dim();
    let n = sampling.radii.len() * sampling.per_radius;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let results = map_indexed(n, exec, |i| -> Result<DriftSample> {
        let radius = sampling.radii[i / sampling.per_radius];
        let mut rng = seed.child(i as u64).stream(Clock::Aux(1));
        let dir: DVector<f64> = loop {
            let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let n = v.norm();
            if n > 0.0 {
                break v / n;
            }
        };
        let x = dir * radius;
        let y = if rng.gen::<f64>() < sampling.refresh_share {
            ev.law().sample(&mut rng)
        } else {
            extreme_velocity(ev, &x, rng.gen_bool(0.5))
        };
        let value = ev.drift(&x, &y)?;
        Ok(DriftSample { x: x.as_slice().to_vec(), y: y.as_slice().to_vec(), value })
    });
    results.into_iter().collect()
}

/// Velocity of largest admissible speed in A_x, aligned with ±∇Ū(x).
fn extreme_velocity(ev: &DriftEvaluator<'_>, x: &DVector<f64>, positive: bool) -> DVector<f64> {
    let t = ev.spec().x_terms(ev.model(), x);
    let d = x.len();
    let n = t.grad_ubar.norm();
    let dir = if n > 0.0 { &t.grad_ubar / n } else { DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 }) };
    let reach = ev.spec().config().h.inverse(3.0 * t.ubar);
    let speed = match ev.law() {
        VelocityLaw::UniformSphere { radius, .. } => *radius,
        VelocityLaw::UniformBall { radius, .. } => reach.min(*radius),
        VelocityLaw::Gaussian(_) => reach,
    };
    dir * if positive { speed } else { -speed }
}
