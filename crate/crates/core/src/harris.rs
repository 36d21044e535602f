//! Weighted-norm contraction of a finite Markov kernel under a Doeblin overlap
//! condition and a geometric drift.
//!
//! For ζ ≥ 0 and V ≥ 1, ρ_ζ(μ, ν) = sup{μ(φ) − ν(φ) : |φ| ≤ 1 + ζV}. On a
//! finite space the supremum decouples state by state and is attained by
//! φ(x) = sign(μ(x) − ν(x))(1 + ζV(x)), so ρ_ζ(μ, ν) = Σ|μ(x) − ν(x)|(1 + ζV(x)).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use std::fmt;

const ROW_TOL: f64 = 1e-12;
/// Slack in the hypothesis checks and the final ratio comparison.
const CHECK_TOL: f64 = 1e-12;

/// Row-stochastic kernel on {0, …, n−1} with a Lyapunov weight V ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    q: DMatrix<f64>,
    v: DVector<f64>,
}

impl FiniteChain {
    pub fn new(q: DMatrix<f64>, v: DVector<f64>) -> Result<Self> {
        let n = q.nrows();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if q.ncols() != n {
            return Err(Error::Dimension { expected: n, got: q.ncols() });
        }
        crate::error::check_dim(n, v.len())?;
        for (i, row) in q.row_iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidParameter(format!("row {i} has a negative or NaN entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidParameter(format!("row {i} sums to {s}")));
            }
        }
        if let Some(i) = v.iter().position(|&x| !(x >= 1.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("V({i}) = {} is below 1", v[i])));
        }
        Ok(FiniteChain { q, v })
    }

    pub fn states(&self) -> usize {
        self.v.len()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn weight(&self) -> &DVector<f64> {
        &self.v
    }

    /// μQ for a row vector μ.
    pub fn push(&self, mu: &DVector<f64>) -> DVector<f64> {
        self.q.tr_mul(mu)
    }

    /// QV as a per-state vector.
    pub fn drift(&self) -> DVector<f64> {
        &self.q * &self.v
    }
}

/// Five states, V = 2^x, a 0.3 uniform refresh on top of a step towards state 0.
///
/// Rows differ in their 0.7 point mass only, so every pair overlaps by 0.3.
pub fn bundled_chain() -> (FiniteChain, HarrisConstants) {
    let n = 5;
    let q = DMatrix::from_fn(n, n, |i, j| {
        let down = if j == i.saturating_sub(1) { 0.7 } else { 0.0 };
        down + 0.3 / n as f64
    });
    let v = DVector::from_fn(n, |i, _| (1u32 << i) as f64);
    let chain = FiniteChain::new(q, v).expect("bundled chain is stochastic");
    let constants = HarrisConstants::new(0.3, 0.5, 5.0, 20.0).expect("bundled constants are admissible");
    (chain, constants)
}

/// Overlap α, drift rate γ and level C₁ together with the sublevel C₂ > 2C₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarrisConstants {
    pub alpha: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl HarrisConstants {
    /// α = 0 is admitted; it only yields the non-contractive factor 1 + ζC₁.
    pub fn new(alpha: f64, gamma: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) || !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("need α ∈ [0,1), γ ∈ (0,1), got α = {alpha}, γ = {gamma}")));
        }
        if !(c1 > 0.0) || !(c2 > 2.0 * c1) || !c2.is_finite() {
            return Err(Error::InvalidParameter(format!("need C₁ > 0 and C₂ > 2C₁, got C₁ = {c1}, C₂ = {c2}")));
        }
        Ok(HarrisConstants { alpha, gamma, c1, c2 })
    }

    /// κ₁ ∨ κ₂ for a caller-chosen ζ; valid for any C₂ > 2C₁.
    pub fn kappa_for(&self, zeta: f64) -> f64 {
        let HarrisConstants { alpha, gamma, c1, c2 } = *self;
        let k1 = gamma + (1.0 - gamma) * (1.0 + zeta * c1) / (1.0 + zeta * c2 / 2.0);
        let k2 = (1.0 - alpha + zeta * c1 * (1.0 - gamma) / 2.0).max(gamma);
        k1.max(k2)
    }

    /// Constants used by [`check_contraction`]: the closed form when C₂ = 4C₁,
    /// otherwise the closed-form ζ fed through [`HarrisConstants::kappa_for`].
    pub fn contraction(&self) -> Result<Contraction> {
        let c = contraction_constants(self.alpha, self.gamma, self.c1)?;
        if c.boundary || (self.c2 - 4.0 * self.c1).abs() <= 1e-12 * self.c2 {
            Ok(c)
        } else {
            Ok(Contraction { kappa: self.kappa_for(c.zeta), ..c })
        }
    }
}

/// (ζ, κ) for one kernel step. When `boundary` is set, α = 0 and κ is the
/// non-contractive factor 1 + ζC₁ for the reported ζ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    pub zeta: f64,
    pub kappa: f64,
    pub boundary: bool,
}

/// ζ = α/((1 − γ)C₁) and κ = (1 − α/2) ∨ ((3 + γ)/4), the values for C₂ = 4C₁.
///
/// At α = 0 the formula degenerates to ζ = 0 and κ = 1; the boundary flag is
/// set and [`boundary_factor`] gives the bound for any positive ζ instead.
pub fn contraction_constants(alpha: f64, gamma: f64, c1: f64) -> Result<Contraction> {
    HarrisConstants::new(alpha, gamma, c1, 4.0 * c1)?;
    if alpha == 0.0 {
        return Ok(Contraction { zeta: 0.0, kappa: 1.0, boundary: true });
    }
    let zeta = alpha / ((1.0 - gamma) * c1);
    let kappa = (1.0 - alpha / 2.0).max((3.0 + gamma) / 4.0);
    Ok(Contraction { zeta, kappa, boundary: false })
}

/// ρ_ζ(μQ, νQ) ≤ (1 + ζC₁) ρ_ζ(μ, ν) without any overlap.
pub fn boundary_factor(zeta: f64, c1: f64) -> f64 {
    1.0 + zeta * c1
}

/// Σ|μ(x) − ν(x)|(1 + ζV(x)).
pub fn rho_zeta(mu: &DVector<f64>, nu: &DVector<f64>, v: &DVector<f64>, zeta: f64) -> Result<f64> {
    crate::error::check_dim(v.len(), mu.len())?;
    crate::error::check_dim(v.len(), nu.len())?;
    if !(zeta >= 0.0) {
        return Err(Error::InvalidParameter(format!("ζ must be non-negative, got {zeta}")));
    }
    Ok(mu.iter().zip(nu.iter()).zip(v.iter()).map(|((a, b), w)| (a - b).abs() * (1.0 + zeta * w)).sum())
}

/// Pairs and states at which the hypotheses fail.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// (x, y, ‖Q(x,·) − Q(y,·)‖_TV) with V(x) + V(y) ≤ C₂ and overlap below α.
    pub overlap: Vec<(usize, usize, f64)>,
    /// (x, QV(x), γV(x) + C₁(1 − γ)) where the drift fails.
    pub drift: Vec<(usize, f64, f64)>,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.overlap.is_empty() && self.drift.is_empty()
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, y, tv) in &self.overlap {
            writeln!(f, "overlap: states ({x}, {y}) have total variation {tv}")?;
        }
        for (x, qv, cap) in &self.drift {
            writeln!(f, "drift: state {x} has QV = {qv} > {cap}")?;
        }
        Ok(())
    }
}

/// Checks the overlap and drift hypotheses for the given constants.
pub fn check_hypotheses(chain: &FiniteChain, c: &HarrisConstants) -> HypothesisReport {
    let n = chain.states();
    let mut report = HypothesisReport::default();
    let tv_cap = 2.0 * (1.0 - c.alpha);
    for x in 0..n {
        for y in x + 1..n {
            if chain.v[x] + chain.v[y] > c.c2 {
                continue;
            }
            let tv: f64 = (0..n).map(|j| (chain.q[(x, j)] - chain.q[(y, j)]).abs()).sum();
            if tv > tv_cap + CHECK_TOL {
                report.overlap.push((x, y, tv));
            }
        }
    }
    let qv = chain.drift();
    for x in 0..n {
        let cap = c.gamma * chain.v[x] + c.c1 * (1.0 - c.gamma);
        if qv[x] > cap + CHECK_TOL * cap {
            report.drift.push((x, qv[x], cap));
        }
    }
    report
}

/// Outcome of [`check_contraction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub constants: HarrisConstants,
    pub zeta: f64,
    pub kappa: f64,
    pub worst_ratio: f64,
    pub trials: usize,
    pub pass: bool,
}

/// Random probability vector, flat Dirichlet; every third draw is sparse so that
/// point masses and two-point measures are exercised too.
fn random_measure(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut w = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(Exp1));
    if k % 3 == 0 {
        let keep = rng.gen_range(0..n);
        let other = rng.gen_range(0..n);
        for i in 0..n {
            if i != keep && i != other {
                w[i] = 0.0;
            }
        }
    }
    let s = w.sum();
    w / s
}

/// Largest ρ_ζ(μQ, νQ)/ρ_ζ(μ, ν) over `trials` random pairs plus all pairs of
/// point masses; passes iff it does not exceed κ by more than 1e−12.
///
/// Fails with [`Error::Hypotheses`] when the chain violates the assumptions.
pub fn check_contraction(chain: &FiniteChain, c: &HarrisConstants, trials: usize, seed: u64) -> Result<ContractionReport> {
    let report = check_hypotheses(chain, c);
    if !report.holds() {
        return Err(Error::Hypotheses(report.to_string()));
    }
    let Contraction { zeta, kappa, .. } = c.contraction()?;
    let n = chain.states();
    let v = chain.weight();
    let ratio = |mu: &DVector<f64>, nu: &DVector<f64>| -> Result<f64> {
        let before = rho_zeta(mu, nu, v, zeta)?;
        if before == 0.0 {
            return Ok(0.0);
        }
        Ok(rho_zeta(&chain.push(mu), &chain.push(nu), v, zeta)? / before)
    };
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            let (mut mu, mut nu) = (DVector::zeros(n), DVector::zeros(n));
            mu[x] = 1.0;
            nu[y] = 1.0;
            worst = worst.max(ratio(&mu, &nu)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..trials {
        let mu = random_measure(n, k, &mut rng);
        let nu = random_measure(n, k + 1, &mut rng);
        worst = worst.max(ratio(&mu, &nu)?);
    }
    Ok(ContractionReport { constants: *c, zeta, kappa, worst_ratio: worst, trials, pass: worst <= kappa + CHECK_TOL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn delta(n: usize, i: usize) -> DVector<f64> {
        let mut d = DVector::zeros(n);
        d[i] = 1.0;
        d
    }

    #[test]
    fn worked_constants() {
        let c = contraction_constants(0.5, 0.5, 1.0).unwrap();
        assert_eq!((c.zeta, c.kappa, c.boundary), (1.0, 0.875, false));
        let b = contraction_constants(0.0, 0.5, 1.0).unwrap();
        assert!(b.boundary && b.kappa == 1.0);
        assert_eq!(boundary_factor(0.5, 4.0), 3.0);
        // γ → 1 with small α: the (3 + γ)/4 branch is active and κ → 1⁻
        let g = contraction_constants(0.1, 0.999, 1.0).unwrap();
        assert_eq!(g.kappa, 3.999 / 4.0);
        assert!(g.kappa < 1.0);
    }

    #[test]
    fn general_kappa_agrees_at_four_c1() {
        // the closed-form κ bounds the proof's κ₁ ∨ κ₂ from above
        for (a, g, c1) in [(0.5, 0.5, 1.0), (0.3, 0.5, 5.0), (0.05, 0.9, 2.0), (0.9, 0.1, 0.3)] {
            let h = HarrisConstants::new(a, g, c1, 4.0 * c1).unwrap();
            let c = contraction_constants(a, g, c1).unwrap();
            let k = h.kappa_for(c.zeta);
            assert!(k <= c.kappa + 1e-15 && k < 1.0, "{a} {g} {c1}: {k} vs {}", c.kappa);
        }
    }

    #[test]
    fn rejects_inadmissible_inputs() {
        assert!(HarrisConstants::new(0.3, 0.5, 1.0, 2.0).is_err());
        assert!(HarrisConstants::new(1.0, 0.5, 1.0, 4.0).is_err());
        assert!(HarrisConstants::new(0.3, 0.0, 1.0, 4.0).is_err());
        let q = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.4, 0.5]);
        assert!(FiniteChain::new(q, DVector::from_element(2, 1.0)).is_err());
        let q = DMatrix::identity(2, 2);
        assert!(FiniteChain::new(q, DVector::from_vec(vec![1.0, 0.5])).is_err());
    }

    #[test]
    fn rho_examples() {
        let v = DVector::from_vec(vec![1.0, 3.0]);
        let (a, b) = (delta(2, 0), delta(2, 1));
        assert_eq!(rho_zeta(&a, &b, &v, 0.0).unwrap(), 2.0);
        assert_eq!(rho_zeta(&a, &b, &v, 1.0).unwrap(), 6.0);
        assert_eq!(rho_zeta(&a, &a, &v, 1.0).unwrap(), 0.0);
    }

    /// Brute-force sup over the box |φ| ≤ 1 + ζV: every vertex is tried.
    fn vertex_sup(mu: &DVector<f64>, nu: &DVector<f64>, v: &DVector<f64>, zeta: f64) -> f64 {
        let n = v.len();
        (0..1u32 << n)
            .map(|signs| {
                (0..n)
                    .map(|i| {
                        let s = if signs >> i & 1 == 1 { 1.0 } else { -1.0 };
                        (mu[i] - nu[i]) * s * (1.0 + zeta * v[i])
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn closed_form_dominates_random_test_functions() {
        let (chain, _) = bundled_chain();
        let v = chain.weight();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..50 {
            let mu = random_measure(5, k, &mut rng);
            let nu = random_measure(5, k + 1, &mut rng);
            let zeta = rng.gen_range(0.0..2.0);
            let exact = rho_zeta(&mu, &nu, v, zeta).unwrap();
            for _ in 0..1000 {
                let phi: f64 = (0..5)
                    .map(|i| rng.gen_range(-1.0..=1.0) * (1.0 + zeta * v[i]) * (mu[i] - nu[i]))
                    .sum();
                assert!(phi <= exact + 1e-12);
            }
            assert!((vertex_sup(&mu, &nu, v, zeta) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn bundled_chain_contracts() {
        let (chain, c) = bundled_chain();
        assert!(check_hypotheses(&chain, &c).holds());
        let con = c.contraction().unwrap();
        assert!((con.zeta - 0.12).abs() < 1e-15);
        assert_eq!(con.kappa, 0.875);
        let r = check_contraction(&chain, &c, 1000, 1).unwrap();
        assert!(r.pass, "worst ratio {}", r.worst_ratio);
        assert!(r.worst_ratio > 0.0);
    }

    #[test]
    fn iid_chain_has_zero_ratio() {
        let row = [0.1, 0.2, 0.3, 0.4];
        let q = DMatrix::from_fn(4, 4, |_, j| row[j]);
        let chain = FiniteChain::new(q, DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let c = HarrisConstants::new(0.5, 0.5, 5.0, 20.0).unwrap();
        let r = check_contraction(&chain, &c, 200, 2).unwrap();
        // μQ = νQ up to the rounding of the two matrix products
        assert!(r.worst_ratio < 1e-14, "{}", r.worst_ratio);
    }

    #[test]
    fn identity_chain_fails_overlap() {
        let chain = FiniteChain::new(DMatrix::identity(3, 3), DVector::from_element(3, 1.0)).unwrap();
        let c = HarrisConstants::new(0.2, 0.5, 1.0, 4.0).unwrap();
        let report = check_hypotheses(&chain, &c);
        assert_eq!(report.overlap.len(), 3);
        assert!(report.drift.is_empty());
        match check_contraction(&chain, &c, 10, 0) {
            Err(Error::Hypotheses(msg)) => assert!(msg.contains("states (0, 1)")),
            other => panic!("unexpected {other:?}"),
        }
        // without overlap the step can only expand by the boundary factor
        let v = chain.weight();
        let (a, b) = (delta(3, 0), delta(3, 2));
        let zeta = 0.7;
        let after = rho_zeta(&chain.push(&a), &chain.push(&b), v, zeta).unwrap();
        assert!(after <= boundary_factor(zeta, c.c1) * rho_zeta(&a, &b, v, zeta).unwrap());
    }

    #[test]
    fn general_c2_kappa_holds_numerically() {
        let (chain, _) = bundled_chain();
        for c2 in [12.0, 16.0, 24.0, 40.0] {
            let c = HarrisConstants::new(0.3, 0.5, 5.0, c2).unwrap();
            if !check_hypotheses(&chain, &c).holds() {
                continue;
            }
            let r = check_contraction(&chain, &c, 1000, 3).unwrap();
            assert!(r.kappa < 1.0);
            assert!(r.pass, "C₂ = {c2}: {} > {}", r.worst_ratio, r.kappa);
        }
    }

    proptest! {
        #[test]
        fn rho_is_a_metric_and_grows_with_zeta(
            a in prop::collection::vec(0.01f64..1.0, 4),
            b in prop::collection::vec(0.01f64..1.0, 4),
            c in prop::collection::vec(0.01f64..1.0, 4),
            w in prop::collection::vec(1.0f64..10.0, 4),
            z1 in 0.0f64..3.0,
            dz in 0.0f64..3.0,
        ) {
            let norm = |x: Vec<f64>| { let s: f64 = x.iter().sum(); DVector::from_vec(x) / s };
            let (mu, nu, eta) = (norm(a), norm(b), norm(c));
            let v = DVector::from_vec(w);
            let d = |p: &DVector<f64>, q: &DVector<f64>, z| rho_zeta(p, q, &v, z).unwrap();
            prop_assert_eq!(d(&mu, &mu, z1), 0.0);
            prop_assert!((d(&mu, &nu, z1) - d(&nu, &mu, z1)).abs() < 1e-15);
            prop_assert!(d(&mu, &eta, z1) <= d(&mu, &nu, z1) + d(&nu, &eta, z1) + 1e-12);
            prop_assert!(d(&mu, &nu, z1) <= d(&mu, &nu, z1 + dz));
            let tv: f64 = mu.iter().zip(nu.iter()).map(|(x, y)| (x - y).abs()).sum();
            prop_assert_eq!(d(&mu, &nu, 0.0), tv);
        }
    }
}
