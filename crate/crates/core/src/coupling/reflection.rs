use crate::error::{check_dim, Result};
use crate::velocity::GaussianVel;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Output of the Gaussian reflection coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPair {
    pub g1: DVector<f64>,
    pub g2: DVector<f64>,
    pub merged: bool,
    /// Hitting time of the level r/2 by the driving Brownian motion (may exceed 1).
    pub hitting_time: f64,
}

/// Couples two standard Gaussians G¹, G² so that x¹ + Σ^{1/2}G¹ = x² + Σ^{1/2}G²
/// exactly when a Brownian motion hits ‖Σ^{−1/2}(x² − x¹)‖/2 before time 1.
pub fn reflect_gaussian_pair<R: Rng + ?Sized>(
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    sigma: &GaussianVel,
    rng: &mut R,
) -> Result<GaussianPair> {
    check_dim(x1.len(), x2.len())?;
    check_dim(sigma.cov().nrows(), x1.len())?;
    let z = sigma.inv_sqrt() * (x2 - x1);
    Ok(reflect_whitened(&z, rng))
}

/// Reflection coupling for a whitened displacement z = Σ^{−1/2}(x² − x¹).
///
/// T_c = a²/Z² is drawn from the Lévy law of the hitting time of a = ‖z‖/2.
/// Given a hit before 1, W₁ = a + √(1 − T_c)·N; otherwise W₁ is drawn from
/// the law of W₁ on {max W < a}, with density φ(w) − φ(2a − w) on w < a,
/// by rejection from N(0, 1) with acceptance 1 − exp(−2a(a − w)).
pub fn reflect_whitened<R: Rng + ?Sized>(z: &DVector<f64>, rng: &mut R) -> GaussianPair {
    let d = z.len();
    let g = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    let r = z.norm();
    if r == 0.0 {
        return GaussianPair { g1: g.clone(), g2: g, merged: true, hitting_time: 0.0 };
    }
    let n = z / r;
    let a = 0.5 * r;
    let zt: f64 = StandardNormal.sample(rng);
    let hitting_time = if zt == 0.0 { f64::INFINITY } else { a * a / (zt * zt) };
    let (w1, w2) = if hitting_time <= 1.0 {
        let noise: f64 = StandardNormal.sample(rng);
        let w1 = a + (1.0 - hitting_time).sqrt() * noise;
        (w1, w1 - r)
    } else {
        let w1 = loop {
            let w: f64 = StandardNormal.sample(rng);
            if w < a && rng.gen::<f64>() < -(-2.0 * a * (a - w)).exp_m1() {
                break w;
            }
        };
        (w1, -w1)
    };
    let gp = &g - &n * n.dot(&g);
    GaussianPair { g1: &n * w1 + &gp, g2: &n * w2 + gp, merged: hitting_time <= 1.0, hitting_time }
}
