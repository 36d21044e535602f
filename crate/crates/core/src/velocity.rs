//! Refreshment distributions μ_v.

use crate::error::{Error, Result};
use crate::potentials::matrix_from_rows;
use crate::quadrature::GaussLegendre;
use crate::stats::{normal_cdf, normal_pdf};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

/// Centred Gaussian law N(0, Σ) with cached factorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVel {
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl GaussianVel {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || cov.nrows() == 0 {
            return Err(Error::InvalidParameter("covariance must be a non-empty square matrix".into()));
        }
        if (&cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?.l();
        let eig = SymmetricEigen::new(cov.clone());
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let q = &eig.eigenvectors;
        let sqrt = q * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
        let inv_sqrt = q * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * q.transpose();
        Ok(GaussianVel { cov, chol, sqrt, inv_sqrt, eigenvalues: eig.eigenvalues })
    }

    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter("sigma must be positive".into()));
        }
        Self::new(DMatrix::identity(dim, dim) * (sigma * sigma))
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Symmetric square root Σ^{1/2}.
    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    /// Σ^{−1/2}.
    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Operator norm ‖Σ^{1/2}‖.
    pub fn sqrt_norm(&self) -> f64 {
        self.eigenvalues.max().sqrt()
    }

    /// Operator norm ‖Σ^{−1/2}‖.
    pub fn inv_sqrt_norm(&self) -> f64 {
        1.0 / self.eigenvalues.min().sqrt()
    }
}

/// Refreshment law.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityLaw {
    Gaussian(GaussianVel),
    UniformSphere { dim: usize, radius: f64 },
    UniformBall { dim: usize, radius: f64 },
}

/// Serializable description of a velocity law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySpec {
    Gaussian { cov: Vec<Vec<f64>> },
    IsotropicGaussian { dim: usize, sigma: f64 },
    UniformSphere { dim: usize, radius: f64 },
    UniformBall { dim: usize, radius: f64 },
}

impl VelocitySpec {
    pub fn build(&self) -> Result<VelocityLaw> {
        match self {
            VelocitySpec::Gaussian { cov } => Ok(VelocityLaw::Gaussian(GaussianVel::new(matrix_from_rows(cov)?)?)),
            VelocitySpec::IsotropicGaussian { dim, sigma } => {
                Ok(VelocityLaw::Gaussian(GaussianVel::isotropic(*dim, *sigma)?))
            }
            VelocitySpec::UniformSphere { dim, radius } => VelocityLaw::sphere(*dim, *radius),
            VelocitySpec::UniformBall { dim, radius } => VelocityLaw::ball(*dim, *radius),
        }
    }
}

impl VelocityLaw {
    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) {
            return Err(Error::InvalidParameter("sphere needs dim ≥ 1 and radius > 0".into()));
        }
        Ok(VelocityLaw::UniformSphere { dim, radius })
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) {
            return Err(Error::InvalidParameter("ball needs dim ≥ 1 and radius > 0".into()));
        }
        Ok(VelocityLaw::UniformBall { dim, radius })
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        VelocityLaw::Gaussian(GaussianVel::isotropic(dim, 1.0).expect("identity is SPD"))
    }

    pub fn dim(&self) -> usize {
        match self {
            VelocityLaw::Gaussian(g) => g.cov.nrows(),
            VelocityLaw::UniformSphere { dim, .. } | VelocityLaw::UniformBall { dim, .. } => *dim,
        }
    }

    /// Supremum of ‖y‖ over the support, infinite for Gaussian laws.
    pub fn speed_bound(&self) -> f64 {
        match self {
            VelocityLaw::Gaussian(_) => f64::INFINITY,
            VelocityLaw::UniformSphere { radius, .. } | VelocityLaw::UniformBall { radius, .. } => *radius,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.dim();
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        match self {
            VelocityLaw::Gaussian(g) => &g.chol * z,
            VelocityLaw::UniformSphere { radius, .. } => {
                let n = z.norm();
                z * (radius / n)
            }
            VelocityLaw::UniformBall { radius, .. } => {
                let n = z.norm();
                let u: f64 = rng.gen();
                z * (radius * u.powf(1.0 / d as f64) / n)
            }
        }
    }

    /// True when y lies in the support (up to rounding).
    pub fn in_support(&self, y: &DVector<f64>) -> bool {
        match self {
            VelocityLaw::Gaussian(_) => y.iter().all(|v| v.is_finite()),
            VelocityLaw::UniformSphere { radius, .. } => (y.norm() - radius).abs() <= 1e-12 * radius.max(1.0),
            VelocityLaw::UniformBall { radius, .. } => y.norm() <= radius * (1.0 + 1e-12),
        }
    }

    /// μ_v({y : y₁ ≥ r}).
    pub fn coordinate_tail_prob(&self, r: f64) -> f64 {
        match self {
            VelocityLaw::Gaussian(g) => 1.0 - normal_cdf(r / g.cov[(0, 0)].sqrt()),
            VelocityLaw::UniformSphere { dim, radius } => {
                if *dim == 1 {
                    return if r <= -radius {
                        1.0
                    } else if r <= *radius {
                        0.5
                    } else {
                        0.0
                    };
                }
                symmetric_tail(r / radius, |u| beta_reg((*dim as f64 - 1.0) / 2.0, 0.5, 1.0 - u * u))
            }
            VelocityLaw::UniformBall { dim, radius } => {
                symmetric_tail(r / radius, |u| beta_reg((*dim as f64 + 1.0) / 2.0, 0.5, 1.0 - u * u))
            }
        }
    }

    /// Scale σ with ⟨g, W⟩ = σ Z for W ~ μ_v and a fixed one-dimensional law Z.
    pub(crate) fn projection_scale(&self, g: &DVector<f64>) -> f64 {
        match self {
            VelocityLaw::Gaussian(v) => g.dot(&(&v.cov * g)).sqrt(),
            VelocityLaw::UniformSphere { radius, .. } | VelocityLaw::UniformBall { radius, .. } => g.norm() * radius,
        }
    }

    /// E f(⟨g, W⟩) for W ~ μ_v by one-dimensional quadrature. `kinks` lists
    /// points where f is not smooth; the quadrature splits there.
    pub fn projected_expectation<F: Fn(f64) -> f64>(&self, g: &DVector<f64>, f: F, kinks: &[f64]) -> f64 {
        let sigma = self.projection_scale(g);
        if sigma == 0.0 {
            return f(0.0);
        }
        let rule = GaussLegendre::new(PROJECTION_ORDER);
        match self {
            VelocityLaw::Gaussian(_) => {
                let mut cuts: Vec<f64> = kinks.iter().map(|k| k / sigma).filter(|z| z.abs() < GAUSS_CUTOFF).collect();
                cuts.extend((-GAUSS_CUTOFF as i32..=GAUSS_CUTOFF as i32).map(f64::from));
                piecewise(&rule, cuts, -GAUSS_CUTOFF, GAUSS_CUTOFF, |z| f(sigma * z) * normal_pdf(z))
                    / (1.0 - 2.0 * normal_cdf(-GAUSS_CUTOFF))
            }
            VelocityLaw::UniformSphere { dim: 1, .. } => 0.5 * (f(sigma) + f(-sigma)),
            VelocityLaw::UniformSphere { dim, .. } | VelocityLaw::UniformBall { dim, .. } => {
                let power = match self {
                    VelocityLaw::UniformSphere { .. } => *dim as i32 - 2,
                    _ => *dim as i32,
                };
                // u = cos θ has density ∝ sin^power θ on [0, π]
                let cuts: Vec<f64> = kinks.iter().filter(|k| k.abs() < sigma).map(|k| (k / sigma).acos()).collect();
                let pi = std::f64::consts::PI;
                let num = piecewise(&rule, cuts.clone(), 0.0, pi, |t| f(sigma * t.cos()) * t.sin().powi(power));
                let den = piecewise(&rule, cuts, 0.0, pi, |t| t.sin().powi(power));
                num / den
            }
        }
    }

    /// E f(‖W‖) for W ~ μ_v when ‖W‖ has compact support; `None` for Gaussian laws.
    pub fn radial_expectation<F: Fn(f64) -> f64>(&self, f: F) -> Option<f64> {
        match self {
            VelocityLaw::Gaussian(_) => None,
            VelocityLaw::UniformSphere { radius, .. } => Some(f(*radius)),
            VelocityLaw::UniformBall { dim, radius } => {
                let rule = GaussLegendre::new(PROJECTION_ORDER);
                let d = *dim as f64;
                Some(piecewise(&rule, vec![], 0.0, 1.0, |u| d * u.powi(*dim as i32 - 1) * f(radius * u)))
            }
        }
    }
}

const PROJECTION_ORDER: usize = 24;
const GAUSS_CUTOFF: f64 = 12.0;

/// ∫_lo^hi f split at the given cuts and into panels of length at most 1/8 of the range.
fn piecewise<F: Fn(f64) -> f64>(rule: &GaussLegendre, mut cuts: Vec<f64>, lo: f64, hi: f64, f: F) -> f64 {
    let panels = 16;
    cuts.extend((0..=panels).map(|k| lo + (hi - lo) * k as f64 / panels as f64));
    cuts.retain(|c| *c >= lo && *c <= hi);
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup();
    cuts.windows(2).map(|w| rule.integrate(w[0], w[1], &f)).sum()
}

/// P(t ≥ u) for a symmetric law on [−1, 1] given P(|t| ≥ u) for u ∈ [0, 1].
fn symmetric_tail<F: Fn(f64) -> f64>(u: f64, two_sided: F) -> f64 {
    if u >= 1.0 {
        0.0
    } else if u <= -1.0 {
        1.0
    } else if u >= 0.0 {
        0.5 * two_sided(u)
    } else {
        1.0 - 0.5 * two_sided(-u)
    }
}
