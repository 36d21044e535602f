use super::alpha::AlphaTildeTable;
use super::mirror::{CouplingScenario, MergeReport};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::potentials::PotentialModel;
use crate::rng::{ChainSeed, Clock};
use crate::stats::{mean_se, wilson_interval};
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

/// Default cutoffs M as multiples of ‖Σ^{1/2}‖.
pub const CUTOFF_MULTIPLES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Monte Carlo estimate of the merge-probability lower bound at one cutoff M.
///
/// `bound` uses the bounce-free probability e^{−Λ} with the speed bound
/// ‖Σ^{1/2}‖(M + r_max/2) valid on the reflection event. The `literal_*`
/// fields replace that factor by the displayed g with M̃ = M + ‖Σ^{1/2}‖(1 + E₁/λ_r)R_K,
/// read either as survival e^{−Λ̃} or as occurrence 1 − e^{−Λ̃}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffBound {
    pub cutoff: f64,
    pub bound: f64,
    pub se: f64,
    pub literal_survival: f64,
    pub literal_survival_se: f64,
    pub literal_occurrence: f64,
    pub literal_occurrence_se: f64,
}

/// Lower bound on P(X_t = X̃_t) for the scenario, maximized over the cutoff grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeBound {
    pub best: CutoffBound,
    pub per_cutoff: Vec<CutoffBound>,
    pub samples: usize,
}

impl MergeBound {
    /// The matching upper bound on ½‖P_t(z, ·) − P_t(z̃, ·)‖_TV.
    pub fn half_tv_upper(&self) -> f64 {
        1.0 - self.best.bound
    }
}

/// Nondecreasing upper envelope of r ↦ sup_{‖z‖ ≤ r} ‖∇U(z)‖ on a uniform grid,
/// looked up by rounding the radius up.
#[derive(Debug, Clone)]
struct GradSupProfile {
    step: f64,
    values: Vec<f64>,
}

impl GradSupProfile {
    fn new(model: &PotentialModel, max_radius: f64, points: usize, exec: Execution) -> Self {
        let step = max_radius / points as f64;
        let values = map_indexed(points + 1, exec, |k| model.grad_norm_sup(k as f64 * step));
        let mut run = 0.0f64;
        let values = values.into_iter().map(|v| {
            run = run.max(v);
            run
        });
        GradSupProfile { step, values: values.collect() }
    }

    fn at(&self, radius: f64, model: &PotentialModel) -> f64 {
        let k = (radius / self.step).ceil() as usize;
        match self.values.get(k) {
            Some(&v) => v,
            None => model.grad_norm_sup(radius),
        }
    }
}

/// Survival probability of an exponential budget against integrated rate Λ;
/// a vanishing rate means no bounce.
fn survival(lambda: f64) -> f64 {
    if lambda > 0.0 {
        (-lambda).exp()
    } else {
        1.0
    }
}

/// Monte Carlo evaluation over (E₁, E₂) of
/// E[1{E₁ + E₂ ≤ λ_r t} inf_{0<ρ≤r_max} α̃(ρ, M) g], with E₃ integrated out exactly
/// and r_max = 2(λ_r + E₁)R_K‖Σ^{−1/2}‖/E₂ bounding the whitened distance at H₁.
/// All cutoffs see the same (E₁, E₂) draws.
pub fn merge_lower_bound(sc: &CouplingScenario, n_mc: usize, seed: u64, exec: Execution) -> Result<MergeBound> {
    sc.validate()?;
    if n_mc == 0 {
        return Err(Error::EmptyInput);
    }
    let lam = sc.refresh_rate;
    let rk = sc.compact_radius;
    let t = sc.horizon;
    let s_half = sc.sigma.sqrt_norm();
    let s_inv_half = sc.sigma.inv_sqrt_norm();
    let d = sc.model.dim();
    let cutoffs: Vec<f64> = match sc.tail_cutoff {
        Some(m) => vec![m],
        None => CUTOFF_MULTIPLES.iter().map(|k| k * s_half).collect(),
    };
    let tables = cutoffs
        .iter()
        .map(|&m| AlphaTildeTable::standard(m, d, exec))
        .collect::<Result<Vec<_>>>()?;
    let r_top = tables[0].step * (tables[0].running_inf.len() - 1) as f64;

    // radii met while α̃ can be non-zero: E₁/λ, E₂/λ ≤ t and r_max ≤ r_top
    let m_max = cutoffs.iter().fold(0.0f64, |a, &b| a.max(b));
    let reach = (1.0 + t) * rk + t * s_half * (m_max + 0.5 * r_top);
    let lit_reach = (1.0 + t) * rk + t * (m_max + s_half * (1.0 + t) * rk) / lam.min(1.0);
    let profile = GradSupProfile::new(&sc.model, reach.max(lit_reach).max(1e-12), 256, exec);

    let base = ChainSeed::new(seed, 0xb0d);
    let draws: Vec<Vec<[f64; 3]>> = map_indexed(n_mc, exec, |i| {
        let mut rng = base.child(i as u64).stream(Clock::Aux(3));
        let e1: f64 = Exp1.sample(&mut rng);
        let e2: f64 = Exp1.sample(&mut rng);
        cutoffs
            .iter()
            .zip(&tables)
            .map(|(&m, table)| {
                if e1 + e2 > lam * t {
                    return [0.0; 3];
                }
                let r_max = 2.0 * (lam + e1) * rk * s_inv_half / e2;
                let alpha = table.inf_up_to(r_max);
                if alpha == 0.0 {
                    return [0.0; 3];
                }
                let (h1, h2) = (e1 / lam, e2 / lam);
                let inner = (1.0 + h1) * rk;
                let speed = s_half * (m + 0.5 * r_max);
                let rate = h2 * speed * profile.at(inner + h2 * speed, &sc.model);
                let m_lit = m + s_half * inner;
                let rate_lit = h2 * m_lit * profile.at(inner + (h2 / lam) * m_lit, &sc.model);
                let g_lit = survival(rate_lit);
                [alpha * survival(rate), alpha * g_lit, alpha * (1.0 - g_lit)]
            })
            .collect()
    });

    let per_cutoff: Vec<CutoffBound> = cutoffs
        .iter()
        .enumerate()
        .map(|(j, &cutoff)| {
            let col = |c: usize| mean_se(&draws.iter().map(|row| row[j][c]).collect::<Vec<_>>());
            let (bound, se) = col(0);
            let (literal_survival, literal_survival_se) = col(1);
            let (literal_occurrence, literal_occurrence_se) = col(2);
            CutoffBound { cutoff, bound, se, literal_survival, literal_survival_se, literal_occurrence, literal_occurrence_se }
        })
        .collect();
    let best = *per_cutoff.iter().max_by(|a, b| a.bound.total_cmp(&b.bound)).expect("non-empty grid");
    Ok(MergeBound { best, per_cutoff, samples: n_mc })
}

/// Coupling estimate of ‖P_t(z, ·) − P_t(z̃, ·)‖_TV ≤ 2 P(not merged by t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub merged: usize,
    pub runs: usize,
    pub merge_rate: f64,
    pub tv_upper: f64,
    /// Wilson interval for tv_upper at 95%.
    pub tv_lo: f64,
    pub tv_hi: f64,
}

/// 2(1 − merged fraction) with the Wilson interval mapped through the same affine map.
pub fn tv_upper_from_merges(reports: &[MergeReport]) -> Result<TvEstimate> {
    let runs = reports.len();
    let merged = reports.iter().filter(|r| r.merged).count();
    tv_from_counts(merged, runs)
}

pub fn tv_from_counts(merged: usize, runs: usize) -> Result<TvEstimate> {
    let (lo, hi) = wilson_interval(merged, runs, 1.96)?;
    let p = merged as f64 / runs as f64;
    Ok(TvEstimate { merged, runs, merge_rate: p, tv_upper: 2.0 * (1.0 - p), tv_lo: 2.0 * (1.0 - hi), tv_hi: 2.0 * (1.0 - lo) })
}
