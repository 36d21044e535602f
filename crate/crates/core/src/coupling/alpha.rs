//! The merge-and-stay-bounded probability α̃(r, M) of the Gaussian reflection coupling.
//!
//! With a = r/2 and Z standard normal, T_c = a²/Z², so
//! α̃(r, M) = E[1{|Z| ≥ a} P_in(a²/Z²)] with
//! P_in(s) = P((1 − s)N² + Q ≤ M²), Q ~ χ²_{d−1} independent of N.
//! The outer integral uses v = a + w² to remove the square-root behaviour at
//! v = a; the inner one integrates over √Q = M sin θ so that its nodes do not
//! depend on r.

use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::quadrature::GaussLegendre;
use crate::stats::{chi_square_cdf, normal_cdf};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{FRAC_PI_2, SQRT_2};

const ORDER: usize = 24;
const PANELS: usize = 8;
/// Outer integration reaches v = a + 12.
const V_SPAN: f64 = 12.0;

/// Fixed quadrature for one (M, d): nodes cos θ_j and weights of the chi density.
#[derive(Debug, Clone)]
pub struct AlphaTilde {
    m: f64,
    dim: usize,
    /// (M cos θ_j, weight) pairs of the inner integral; empty when d = 1.
    inner: Vec<(f64, f64)>,
    outer: Vec<(f64, f64)>,
}

impl AlphaTilde {
    pub fn new(m: f64, dim: usize) -> Result<Self> {
        if !(m >= 0.0) || dim == 0 {
            return Err(Error::InvalidParameter(format!("need M ≥ 0 and d ≥ 1, got M = {m}, d = {dim}")));
        }
        let rule = GaussLegendre::new(ORDER);
        let mut inner = Vec::new();
        if dim > 1 && m.is_finite() {
            // density of √Q, Q ~ χ²_k: u^{k−1} e^{−u²/2} / (2^{k/2−1} Γ(k/2))
            let k = (dim - 1) as f64;
            let log_norm = (k / 2.0 - 1.0) * std::f64::consts::LN_2 + ln_gamma(k / 2.0);
            let h = FRAC_PI_2 / PANELS as f64;
            for p in 0..PANELS {
                for (x, w) in rule.nodes_on(p as f64 * h, (p + 1) as f64 * h) {
                    let u = m * x.sin();
                    let dens = ((k - 1.0) * u.ln() - 0.5 * u * u - log_norm).exp();
                    inner.push((m * x.cos(), w * dens * m * x.cos()));
                }
            }
        }
        let top = V_SPAN.sqrt();
        let h = top / PANELS as f64;
        let outer = (0..PANELS).flat_map(|p| rule.nodes_on(p as f64 * h, (p + 1) as f64 * h)).collect();
        Ok(AlphaTilde { m, dim, inner, outer })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// P((1 − s)N² + Q ≤ M²) with c = √(1 − s).
    fn p_in(&self, c: f64) -> f64 {
        // 2Φ(x) − 1 = erf(x/√2)
        let band = |x: f64| if c > 0.0 { libm::erf(x / (c * SQRT_2)) } else { 1.0 };
        if self.dim == 1 {
            band(self.m)
        } else {
            self.inner.iter().map(|&(mc, w)| w * band(mc)).sum()
        }
    }

    /// α̃(r, M); zero at r = 0 as the integral formula's prefactor dictates.
    pub fn eval(&self, r: f64) -> f64 {
        if !(r > 0.0) || self.m == 0.0 {
            return 0.0;
        }
        let a = 0.5 * r;
        if self.m.is_infinite() {
            return 2.0 * normal_cdf(-a);
        }
        let dens = |v: f64| 2.0 * (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let total: f64 = self
            .outer
            .iter()
            .map(|&(w, wt)| {
                let v = a + w * w;
                let c = (1.0 - (a / v).powi(2)).max(0.0).sqrt();
                wt * 2.0 * w * dens(v) * self.p_in(c)
            })
            .sum();
        total.clamp(0.0, 1.0)
    }

    /// lim_{r→0+} α̃(r, M) = P(χ²_d ≤ M²).
    pub fn small_r_limit(&self) -> f64 {
        if self.m.is_infinite() {
            1.0
        } else {
            chi_square_cdf(self.dim, self.m * self.m)
        }
    }
}

/// α̃(r, M) for a d-dimensional coupling.
pub fn alpha_tilde(r: f64, m: f64, dim: usize) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("r must be non-negative, got {r}")));
    }
    Ok(AlphaTilde::new(m, dim)?.eval(r))
}

/// inf_{0 < ρ ≤ r} α̃(ρ, M) on a uniform grid in r.
///
/// α̃ is not monotone in r when M is finite, so a bound that only knows an
/// upper bound r_max on the true argument needs the running infimum. Lookups
/// round r_max up to the next grid point, and beyond the grid the value is
/// taken as 0, which is below 2Φ(−r_top/2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaTildeTable {
    pub m: f64,
    pub dim: usize,
    pub step: f64,
    /// running_inf[k] = min(lim_{0+}, α̃(step), …, α̃(k·step)).
    pub running_inf: Vec<f64>,
}

impl AlphaTildeTable {
    pub fn new(m: f64, dim: usize, r_top: f64, points: usize, exec: Execution) -> Result<Self> {
        if !(r_top > 0.0) || points == 0 {
            return Err(Error::InvalidParameter("need r_top > 0 and at least one grid point".into()));
        }
        let at = AlphaTilde::new(m, dim)?;
        let step = r_top / points as f64;
        let values = map_indexed(points, exec, |k| at.eval((k + 1) as f64 * step));
        let mut running_inf = Vec::with_capacity(points + 1);
        let mut lo = at.small_r_limit();
        running_inf.push(lo);
        for v in values {
            lo = lo.min(v);
            running_inf.push(lo);
        }
        Ok(AlphaTildeTable { m, dim, step, running_inf })
    }

    /// Grid reaching past the point where 2Φ(−r/2) < 1e−15.
    pub fn standard(m: f64, dim: usize, exec: Execution) -> Result<Self> {
        Self::new(m, dim, 16.0, 800, exec)
    }

    /// Lower bound on inf_{0 < ρ ≤ r_max} α̃(ρ, M).
    pub fn inf_up_to(&self, r_max: f64) -> f64 {
        if !(r_max > 0.0) {
            return self.running_inf[0];
        }
        let k = (r_max / self.step).ceil() as usize;
        self.running_inf.get(k).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::reflection::reflect_whitened;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_r_is_zero() {
        for d in [1, 3] {
            for m in [0.5, 2.0, f64::INFINITY] {
                assert_eq!(alpha_tilde(0.0, m, d).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn infinite_cutoff_is_hitting_probability() {
        let v = alpha_tilde(2.0, f64::INFINITY, 3).unwrap();
        assert!((v - 2.0 * normal_cdf(-1.0)).abs() < 1e-15);
        assert!((v - 0.3173105078629141).abs() < 1e-12);
    }

    #[test]
    fn large_cutoff_approaches_hitting_probability() {
        for d in [1, 2, 5] {
            for r in [0.5, 1.0, 2.0, 4.0] {
                let v = alpha_tilde(r, 40.0, d).unwrap();
                let exact = 2.0 * normal_cdf(-r / 2.0);
                assert!((v - exact).abs() < 1e-10, "d={d} r={r}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        // P_in(s) = 2Φ(M/√(1−s)) − 1 integrated against the hitting law
        let (r, m) = (1.0, 1.0);
        let a: f64 = 0.5 * r;
        let reference = crate::quadrature::adaptive_simpson(
            &|s: f64| {
                if s <= 0.0 {
                    return 0.0;
                }
                let dens = a / (2.0 * std::f64::consts::PI * s.powi(3)).sqrt() * (-a * a / (2.0 * s)).exp();
                dens * (2.0 * normal_cdf(m / (1.0 - s).sqrt()) - 1.0)
            },
            0.0,
            1.0,
            1e-12,
        );
        let v = alpha_tilde(r, m, 1).unwrap();
        assert!((v - reference).abs() < 1e-8, "{v} vs {reference}");
    }

    #[test]
    fn nondecreasing_in_cutoff() {
        for d in [1, 2, 4] {
            for r in [0.5, 1.0, 2.0] {
                let mut prev = 0.0;
                for m in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, f64::INFINITY] {
                    let v = alpha_tilde(r, m, d).unwrap();
                    assert!(v >= prev - 1e-13, "d={d} r={r} M={m}");
                    prev = v;
                }
                assert!(prev <= 1.0);
            }
        }
    }

    #[test]
    fn small_r_limit_is_continuous() {
        let at = AlphaTilde::new(1.5, 3).unwrap();
        assert!((at.eval(1e-4) - at.small_r_limit()).abs() < 1e-3);
    }

    #[test]
    fn matches_monte_carlo() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3] {
            for r in [0.5, 1.0, 2.0] {
                let mut z = DVector::zeros(d);
                z[0] = r;
                for m in [1.0, 2.0] {
                    let hits = (0..n)
                        .filter(|_| {
                            let p = reflect_whitened(&z, &mut rng);
                            p.merged && (&p.g1 - &z * 0.5).norm() <= m
                        })
                        .count();
                    let est = hits as f64 / n as f64;
                    let exact = alpha_tilde(r, m, d).unwrap();
                    let se = (exact * (1.0 - exact) / n as f64).sqrt();
                    assert!((est - exact).abs() < 4.0 * se, "d={d} r={r} M={m}: {est} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn table_is_a_running_infimum() {
        let t = AlphaTildeTable::new(1.0, 2, 8.0, 200, Execution::Sequential).unwrap();
        let at = AlphaTilde::new(1.0, 2).unwrap();
        for w in t.running_inf.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for r in [0.3, 1.7, 4.2] {
            let inf = t.inf_up_to(r);
            assert!(inf <= at.eval(r) + 1e-15);
            assert!(inf <= at.small_r_limit());
        }
        assert_eq!(t.inf_up_to(100.0), 0.0);
    }
}
