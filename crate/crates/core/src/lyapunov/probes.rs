//! Numerical growth probes for the gradient and Hessian of U at large radii.
//!
//! Each limit condition is read off the log-log slope of a radial extreme
//! between the two outermost probe radii: "bounded" means slope ≤ tol,
//! "bounded away from 0" means slope ≥ −tol, "tends to 0" means slope < −tol
//! and "tends to ∞" means slope > tol.

use crate::potentials::PotentialModel;
use crate::rng::{ChainSeed, Clock};
use nalgebra::{DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Unit directions for radial scans: both signs of every axis, the diagonal,
/// an angular grid in 2D and seeded random directions in higher dimension.
pub fn scan_directions(d: usize, extra: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for i in 0..d {
        for sign in [1.0, -1.0] {
            out.push(DVector::from_fn(d, |j, _| if i == j { sign } else { 0.0 }));
        }
    }
    if d == 1 {
        return out;
    }
    let diag = 1.0 / (d as f64).sqrt();
    out.push(DVector::from_element(d, diag));
    out.push(DVector::from_element(d, -diag));
    if d == 2 {
        for k in 0..extra {
            let a = std::f64::consts::TAU * (k as f64 + 0.5) / extra as f64;
            out.push(DVector::from_vec(vec![a.cos(), a.sin()]));
        }
    } else {
        let mut rng = ChainSeed::new(0x5ca7, d as u64).stream(Clock::Aux(2));
        for _ in 0..extra {
            let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            out.push(&v / v.norm());
        }
    }
    out
}

/// Spectral norm of the Hessian of U at x.
pub fn hessian_norm(model: &PotentialModel, x: &DVector<f64>) -> f64 {
    SymmetricEigen::new(model.hessian(x)).eigenvalues.amax()
}

/// Radii and directions used by the probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeGrid {
    pub radii: Vec<f64>,
    pub extra_directions: usize,
    pub tol: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        ProbeGrid { radii: vec![1e2, 1e3, 1e4], extra_directions: 32, tol: 0.01 }
    }
}

/// U, ‖∇U‖ and ‖∇²U‖ along every probe direction at one radius.
#[derive(Debug, Clone)]
struct Shell {
    u: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

fn shells(model: &PotentialModel, grid: &ProbeGrid) -> Vec<Shell> {
    let dirs = scan_directions(model.dim(), grid.extra_directions);
    grid.radii
        .iter()
        .map(|&r| {
            let mut s = Shell { u: vec![], grad: vec![], hess: vec![] };
            for dir in &dirs {
                let x = dir * r;
                s.u.push(model.energy(&x));
                s.grad.push(model.grad(&x).norm());
                s.hess.push(hessian_norm(model, &x));
            }
            s
        })
        .collect()
}

/// Extreme of a per-direction quantity: min for lower limits, max for upper ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extreme {
    Min,
    Max,
}

fn slope<F: Fn(&Shell, usize) -> f64>(sh: &[Shell], radii: &[f64], ext: Extreme, q: F) -> f64 {
    let n = sh.len();
    let pick = |s: &Shell| {
        let vals = (0..s.u.len()).map(|i| q(s, i));
        match ext {
            Extreme::Min => vals.fold(f64::INFINITY, f64::min),
            Extreme::Max => vals.fold(f64::NEG_INFINITY, f64::max),
        }
    };
    let (a, b) = (pick(&sh[n - 2]), pick(&sh[n - 1]));
    (b.ln() - a.ln()) / (radii[n - 1].ln() - radii[n - 2].ln())
}

/// Log-log slopes behind the growth conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A3Report {
    /// slope of min ‖∇U‖
    pub grad_slope: f64,
    /// slope of max ‖∇²U‖
    pub hess_slope: f64,
    pub holds: bool,
}

/// ‖∇U‖ → ∞ and ‖∇²U‖ bounded.
pub fn probe_a3(model: &PotentialModel, grid: &ProbeGrid) -> A3Report {
    let sh = shells(model, grid);
    let grad_slope = slope(&sh, &grid.radii, Extreme::Min, |s, i| s.grad[i]);
    let hess_slope = slope(&sh, &grid.radii, Extreme::Max, |s, i| s.hess[i]);
    A3Report { grad_slope, hess_slope, holds: grad_slope > grid.tol && hess_slope <= grid.tol }
}

/// Slopes for one ς of the three limits in the power-growth condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub varsigma: f64,
    pub slopes: [f64; 3],
    pub holds: bool,
}

/// liminf ‖∇U‖/U^{1−ς} > 0, limsup ‖∇U‖/U^{1−ς/2} < ∞, limsup ‖∇²U‖/U^{1−ς} < ∞.
pub fn probe_a4(model: &PotentialModel, varsigma: f64, grid: &ProbeGrid) -> PowerReport {
    let sh = shells(model, grid);
    a4_from(&sh, varsigma, grid)
}

fn a4_from(sh: &[Shell], s: f64, grid: &ProbeGrid) -> PowerReport {
    let r = &grid.radii;
    let s0 = slope(sh, r, Extreme::Min, |x, i| x.grad[i] / x.u[i].powf(1.0 - s));
    let s1 = slope(sh, r, Extreme::Max, |x, i| x.grad[i] / x.u[i].powf(1.0 - s / 2.0));
    let s2 = slope(sh, r, Extreme::Max, |x, i| x.hess[i] / x.u[i].powf(1.0 - s));
    PowerReport { varsigma: s, slopes: [s0, s1, s2], holds: s0 >= -grid.tol && s1 <= grid.tol && s2 <= grid.tol }
}

/// ‖∇²U‖/‖∇U‖ → 0, liminf ‖∇U‖/U^{1−ς} > 0, ‖∇U‖/U^{2(1−ς)} → 0.
pub fn probe_a5(model: &PotentialModel, varsigma: f64, grid: &ProbeGrid) -> PowerReport {
    let sh = shells(model, grid);
    a5_from(&sh, varsigma, grid)
}

fn a5_from(sh: &[Shell], s: f64, grid: &ProbeGrid) -> PowerReport {
    let r = &grid.radii;
    let s0 = slope(sh, r, Extreme::Max, |x, i| x.hess[i] / x.grad[i]);
    let s1 = slope(sh, r, Extreme::Min, |x, i| x.grad[i] / x.u[i].powf(1.0 - s));
    let s2 = slope(sh, r, Extreme::Max, |x, i| x.grad[i] / x.u[i].powf(2.0 * (1.0 - s)));
    PowerReport { varsigma: s, slopes: [s0, s1, s2], holds: s0 < -grid.tol && s1 >= -grid.tol && s2 < -grid.tol }
}

/// Values of ς probed by [`find_a4`] and [`find_a5`]: ς⁻¹ on a grid of step 0.01 in (1, 20].
fn varsigma_grid() -> impl Iterator<Item = f64> {
    (1..=1900).map(|k| 1.0 / (1.0 + 0.01 * k as f64))
}

/// Some ς ∈ (0, 1) for which the power-growth probes pass, if any.
pub fn find_a4(model: &PotentialModel, grid: &ProbeGrid) -> Option<f64> {
    let sh = shells(model, grid);
    varsigma_grid().find(|&s| a4_from(&sh, s, grid).holds)
}

/// Some ς ∈ (0, 1) for which the Hessian-ratio probes pass, if any.
pub fn find_a5(model: &PotentialModel, grid: &ProbeGrid) -> Option<f64> {
    let sh = shells(model, grid);
    varsigma_grid().find(|&s| a5_from(&sh, s, grid).holds)
}

/// Closed-form membership for U = Σ (1 + x_i²)^{α_i/2}: the first condition holds
/// iff [max α/2, min α] meets (1, ∞).
pub fn aniso_a4_interval(alphas: &[f64]) -> bool {
    let (lo, hi) = extremes(alphas);
    (hi / 2.0).max(1.0) <= lo && lo > 1.0
}

/// The second holds iff [2 max α/(1 + max α), min α] meets (1, ∞).
pub fn aniso_a5_interval(alphas: &[f64]) -> bool {
    let (lo, hi) = extremes(alphas);
    (2.0 * hi / (1.0 + hi)).max(1.0) <= lo && lo > 1.0
}

fn extremes(alphas: &[f64]) -> (f64, f64) {
    alphas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_passes_a3() {
        let m = PotentialModel::standard_gaussian(3);
        let rep = probe_a3(&m, &ProbeGrid::default());
        assert!(rep.holds, "{rep:?}");
        assert!((rep.grad_slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quartic_fails_a3() {
        let m = PotentialModel::aniso_power(vec![4.0, 4.0]).unwrap();
        assert!(!probe_a3(&m, &ProbeGrid::default()).holds);
    }

    #[test]
    fn aniso_membership_matches_intervals() {
        // pairs chosen away from interval endpoints
        let pairs = [(2.0, 3.0), (5.0, 2.0), (4.0 / 3.0, 1.1), (3.0, 3.0), (1.5, 2.5), (6.0, 2.5), (1.3, 2.0)];
        let grid = ProbeGrid::default();
        for (a, b) in pairs {
            let m = PotentialModel::aniso_power(vec![a, b]).unwrap();
            assert_eq!(find_a4(&m, &grid).is_some(), aniso_a4_interval(&[a, b]), "A4 at ({a}, {b})");
            assert_eq!(find_a5(&m, &grid).is_some(), aniso_a5_interval(&[a, b]), "A5 at ({a}, {b})");
        }
    }

    #[test]
    fn interval_examples() {
        // both exponents at least 2: second condition holds, first may fail
        assert!(aniso_a5_interval(&[5.0, 2.0]));
        assert!(!aniso_a4_interval(&[5.0, 2.0]));
        // α = 4/3, β ∈ (1, 8/7): first holds, second fails
        assert!(aniso_a4_interval(&[4.0 / 3.0, 1.1]));
        assert!(!aniso_a5_interval(&[4.0 / 3.0, 1.1]));
    }

    #[test]
    fn directions_are_unit() {
        for d in [1, 2, 5] {
            for v in scan_directions(d, 16) {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
        }
    }
}
