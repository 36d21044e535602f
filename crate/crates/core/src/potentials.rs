//! Catalog of potentials U with gradients, Hessians and segment-wise bounds
//! on the bounce rate used for exact thinning.

use crate::error::{check_dim, Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Gaussian potential U(x) = xᵀPx/2.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPotential {
    precision: DMatrix<f64>,
    lambda_max: f64,
}

impl GaussianPotential {
    pub fn new(precision: DMatrix<f64>) -> Result<Self> {
        if !precision.is_square() || precision.nrows() == 0 {
            return Err(Error::InvalidParameter("precision must be a non-empty square matrix".into()));
        }
        let asym = (&precision - precision.transpose()).abs().max();
        if asym > 1e-12 * precision.abs().max().max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let eig = SymmetricEigen::new(precision.clone());
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let lambda_max = eig.eigenvalues.max();
        Ok(GaussianPotential { precision, lambda_max })
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
}

/// Logistic regression posterior with the heavy-tailed prior g(u) = (1 + u²/σ²)^{β/2}.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticPotential {
    data: Vec<DVector<f64>>,
    labels: Vec<f64>,
    sigma: f64,
    beta: f64,
    data_curvature: f64,
}

impl LogisticPotential {
    pub fn new(data: Vec<DVector<f64>>, labels: Vec<f64>, sigma: f64, beta: f64) -> Result<Self> {
        if data.is_empty() || data.len() != labels.len() {
            return Err(Error::InvalidParameter("need one label per data vector".into()));
        }
        let d = data[0].len();
        if d == 0 || data.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidParameter("data vectors must share a positive dimension".into()));
        }
        if labels.iter().any(|&b| b != 0.0 && b != 1.0) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        if !(sigma > 0.0) || !(beta > 2.0) {
            return Err(Error::InvalidParameter("need sigma > 0 and beta > 2".into()));
        }
        let data_curvature = 0.25 * data.iter().map(|c| c.norm_squared()).sum::<f64>();
        Ok(LogisticPotential { data, labels, sigma, beta, data_curvature })
    }

    pub fn data(&self) -> &[DVector<f64>] {
        &self.data
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn prior(&self, u: f64) -> (f64, f64, f64) {
        let q = u * u / (self.sigma * self.sigma);
        let b = self.beta;
        let s2 = self.sigma * self.sigma;
        let g = (1.0 + q).powf(b / 2.0);
        let g1 = b * u / s2 * (1.0 + q).powf(b / 2.0 - 1.0);
        let g2 = b / s2 * (1.0 + q).powf(b / 2.0 - 2.0) * (1.0 + (b - 1.0) * q);
        (g, g1, g2)
    }

    /// Upper bound of g'' on |u| ≤ m.
    fn prior_curvature_envelope(&self, m: f64) -> f64 {
        let b = self.beta;
        let q = m * m / (self.sigma * self.sigma);
        b / (self.sigma * self.sigma) * (b - 1.0).max(1.0) * (1.0 + q).powf(b / 2.0 - 1.0)
    }
}

/// Closed catalog of targets π ∝ exp(−U).
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialModel {
    Zero { dim: usize },
    Gaussian(GaussianPotential),
    /// U(x) = Σ (1 + x_i²)^{α_i/2}.
    AnisoPower { alphas: Vec<f64> },
    Logistic(LogisticPotential),
    /// U(x) = (x² − 1)²/(1 + x²) + tilt·x.
    DoubleWell1D { tilt: f64 },
    /// U(x) = q(‖x‖²) + amplitude·ln(1 + ‖x‖²) where q(s) = s^{α/2} for s ≥ 1
    /// and the second-order Taylor polynomial of s^{α/2} at 1 inside the unit ball.
    HomogeneousPerturbed { dim: usize, alpha: f64, amplitude: f64 },
}

/// Serializable description of a catalog member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero { dim: usize },
    Gaussian { precision: Vec<Vec<f64>> },
    AnisoPower { alphas: Vec<f64> },
    Logistic { data: Vec<Vec<f64>>, labels: Vec<f64>, sigma: f64, beta: f64 },
    DoubleWell1d { tilt: f64 },
    HomogeneousPerturbed { dim: usize, alpha: f64, amplitude: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<PotentialModel> {
        match self {
            PotentialSpec::Zero { dim } => PotentialModel::zero(*dim),
            PotentialSpec::Gaussian { precision } => PotentialModel::gaussian(matrix_from_rows(precision)?),
            PotentialSpec::AnisoPower { alphas } => PotentialModel::aniso_power(alphas.clone()),
            PotentialSpec::Logistic { data, labels, sigma, beta } => {
                let data = data.iter().map(|c| DVector::from_vec(c.clone())).collect();
                Ok(PotentialModel::Logistic(LogisticPotential::new(data, labels.clone(), *sigma, *beta)?))
            }
            PotentialSpec::DoubleWell1d { tilt } => PotentialModel::double_well(*tilt),
            PotentialSpec::HomogeneousPerturbed { dim, alpha, amplitude } => {
                PotentialModel::homogeneous_perturbed(*dim, *alpha, *amplitude)
            }
        }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("matrix must be square and non-empty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn homog_q(alpha: f64, s: f64) -> (f64, f64, f64) {
    let h = alpha / 2.0;
    if s >= 1.0 {
        (s.powf(h), h * s.powf(h - 1.0), h * (h - 1.0) * s.powf(h - 2.0))
    } else {
        let e = s - 1.0;
        let q2 = h * (h - 1.0);
        (1.0 + h * e + 0.5 * q2 * e * e, h + q2 * e, q2)
    }
}

/// Upper bound on the largest Hessian eigenvalue of q(‖x‖²) over ‖x‖ ≤ m.
fn homog_curvature_envelope(alpha: f64, m: f64) -> f64 {
    let inner = (alpha * (2.0 - alpha / 2.0)).max(alpha).max(alpha * (alpha - 1.0));
    if m <= 1.0 {
        return inner.max(0.0);
    }
    let outer = alpha * (alpha - 1.0).max(1.0) * m.powf(alpha - 2.0).max(1.0);
    inner.max(outer)
}

fn aniso_curvature(alpha: f64, z: f64) -> f64 {
    let q = z * z;
    alpha * (1.0 + q).powf(alpha / 2.0 - 2.0) * (1.0 + (alpha - 1.0) * q)
}

fn aniso_curvature_envelope(alpha: f64, m: f64) -> f64 {
    alpha * (alpha - 1.0).max(1.0) * (1.0 + m * m).powf((alpha / 2.0 - 1.0).max(0.0))
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Sup of |U''| for the double well, attained at x = 0.
const DOUBLE_WELL_CURVATURE_ABS: f64 = 6.0;
/// Sup of U'' for the double well.
const DOUBLE_WELL_CURVATURE_MAX: f64 = 4.0;

impl PotentialModel {
    pub fn zero(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(PotentialModel::Zero { dim })
    }

    pub fn gaussian(precision: DMatrix<f64>) -> Result<Self> {
        Ok(PotentialModel::Gaussian(GaussianPotential::new(precision)?))
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        PotentialModel::Gaussian(GaussianPotential::new(DMatrix::identity(dim, dim)).expect("identity is SPD"))
    }

    pub fn aniso_power(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || alphas.iter().any(|&a| !(a > 1.0)) {
            return Err(Error::InvalidParameter("exponents must exceed 1".into()));
        }
        Ok(PotentialModel::AnisoPower { alphas })
    }

    pub fn double_well(tilt: f64) -> Result<Self> {
        if !tilt.is_finite() {
            return Err(Error::InvalidParameter("tilt must be finite".into()));
        }
        Ok(PotentialModel::DoubleWell1D { tilt })
    }

    pub fn homogeneous_perturbed(dim: usize, alpha: f64, amplitude: f64) -> Result<Self> {
        if dim == 0 || !(alpha > 1.0) || !amplitude.is_finite() {
            return Err(Error::InvalidParameter("need dim ≥ 1, alpha > 1, finite amplitude".into()));
        }
        Ok(PotentialModel::HomogeneousPerturbed { dim, alpha, amplitude })
    }

    pub fn dim(&self) -> usize {
        match self {
            PotentialModel::Zero { dim } => *dim,
            PotentialModel::Gaussian(g) => g.precision.nrows(),
            PotentialModel::AnisoPower { alphas } => alphas.len(),
            PotentialModel::Logistic(l) => l.data[0].len(),
            PotentialModel::DoubleWell1D { .. } => 1,
            PotentialModel::HomogeneousPerturbed { dim, .. } => *dim,
        }
    }

    /// U(x) and ∇U(x), with a dimension check.
    pub fn energy_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_dim(self.dim(), x.len())?;
        Ok((self.energy(x), self.grad(x)))
    }

    /// U(x). Panics in debug builds on a dimension mismatch.
    pub fn energy(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            PotentialModel::Zero { .. } => 0.0,
            PotentialModel::Gaussian(g) => 0.5 * x.dot(&(&g.precision * x)),
            PotentialModel::AnisoPower { alphas } => {
                alphas.iter().zip(x.iter()).map(|(&a, &xi)| (1.0 + xi * xi).powf(a / 2.0)).sum()
            }
            PotentialModel::Logistic(l) => {
                let prior: f64 = x.iter().map(|&u| l.prior(u).0).sum();
                let lik: f64 = l
                    .data
                    .iter()
                    .zip(&l.labels)
                    .map(|(c, &b)| {
                        let t = c.dot(x);
                        -b * t + softplus(t)
                    })
                    .sum();
                prior + lik
            }
            PotentialModel::DoubleWell1D { tilt } => {
                let v = x[0];
                let w = v * v;
                (w - 1.0) * (w - 1.0) / (1.0 + w) + tilt * v
            }
            PotentialModel::HomogeneousPerturbed { alpha, amplitude, .. } => {
                let s = x.norm_squared();
                homog_q(*alpha, s).0 + amplitude * s.ln_1p()
            }
        }
    }

    /// ∇U(x).
    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            PotentialModel::Zero { dim } => DVector::zeros(*dim),
            PotentialModel::Gaussian(g) => &g.precision * x,
            PotentialModel::AnisoPower { alphas } => DVector::from_iterator(
                x.len(),
                alphas.iter().zip(x.iter()).map(|(&a, &xi)| a * xi * (1.0 + xi * xi).powf(a / 2.0 - 1.0)),
            ),
            PotentialModel::Logistic(l) => {
                let mut g = DVector::from_iterator(x.len(), x.iter().map(|&u| l.prior(u).1));
                for (c, &b) in l.data.iter().zip(&l.labels) {
                    let t = c.dot(x);
                    g.axpy(sigmoid(t) - b, c, 1.0);
                }
                g
            }
            PotentialModel::DoubleWell1D { tilt } => {
                let v = x[0];
                let w = 1.0 + v * v;
                DVector::from_element(1, 2.0 * v - 8.0 * v / (w * w) + tilt)
            }
            PotentialModel::HomogeneousPerturbed { alpha, amplitude, .. } => {
                let s = x.norm_squared();
                let (_, q1, _) = homog_q(*alpha, s);
                x * (2.0 * q1 + 2.0 * amplitude / (1.0 + s))
            }
        }
    }

    /// ∇²U(x).
    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(x.len(), self.dim());
        let d = x.len();
        match self {
            PotentialModel::Zero { dim } => DMatrix::zeros(*dim, *dim),
            PotentialModel::Gaussian(g) => g.precision.clone(),
            PotentialModel::AnisoPower { alphas } => DMatrix::from_diagonal(&DVector::from_iterator(
                d,
                alphas.iter().zip(x.iter()).map(|(&a, &xi)| aniso_curvature(a, xi)),
            )),
            PotentialModel::Logistic(l) => {
                let mut h = DMatrix::from_diagonal(&DVector::from_iterator(d, x.iter().map(|&u| l.prior(u).2)));
                for c in &l.data {
                    let p = sigmoid(c.dot(x));
                    h.ger(p * (1.0 - p), c, c, 1.0);
                }
                h
            }
            PotentialModel::DoubleWell1D { .. } => {
                let v = x[0];
                let w = 1.0 + v * v;
                DMatrix::from_element(1, 1, 2.0 - 8.0 / (w * w) + 32.0 * v * v / (w * w * w))
            }
            PotentialModel::HomogeneousPerturbed { alpha, amplitude, .. } => {
                let s = x.norm_squared();
                let (_, q1, q2) = homog_q(*alpha, s);
                let mut h = DMatrix::identity(d, d) * (2.0 * q1 + 2.0 * amplitude / (1.0 + s));
                let radial = 4.0 * q2 - 4.0 * amplitude / ((1.0 + s) * (1.0 + s));
                h.ger(radial, x, x, 1.0);
                h
            }
        }
    }

    /// ⟨y, ∇U(x)⟩₊.
    pub fn bounce_rate(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            PotentialModel::Zero { .. } => 0.0,
            _ => y.dot(&self.grad(x)).max(0.0),
        }
    }

    /// Upper bound B ≥ sup_{s∈[0,h]} ⟨y, ∇U(x + sy)⟩₊.
    pub fn segment_rate_bound(&self, x: &DVector<f64>, y: &DVector<f64>, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("segment length must be positive".into()));
        }
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), y.len())?;
        let rate0 = y.dot(&self.grad(x));
        let bound = match self {
            PotentialModel::Zero { .. } => 0.0,
            PotentialModel::Gaussian(g) => {
                // the rate is affine along the ray
                let slope = y.dot(&(&g.precision * y));
                rate0.max(rate0 + slope * h).max(0.0)
            }
            PotentialModel::AnisoPower { alphas } => {
                let curv: f64 = alphas
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| {
                        let m = x[i].abs().max((x[i] + h * y[i]).abs());
                        y[i] * y[i] * aniso_curvature_envelope(a, m)
                    })
                    .sum();
                rate0.max(0.0) + h * curv
            }
            PotentialModel::Logistic(l) => {
                let lik: f64 = l.data.iter().map(|c| 0.25 * c.dot(y).powi(2)).sum();
                let prior: f64 = (0..x.len())
                    .map(|i| {
                        let m = x[i].abs().max((x[i] + h * y[i]).abs());
                        y[i] * y[i] * l.prior_curvature_envelope(m)
                    })
                    .sum();
                rate0.max(0.0) + h * (lik + prior)
            }
            PotentialModel::DoubleWell1D { .. } => rate0.max(0.0) + h * y[0] * y[0] * DOUBLE_WELL_CURVATURE_MAX,
            PotentialModel::HomogeneousPerturbed { alpha, amplitude, .. } => {
                let xe = x + y * h;
                let m = x.norm().max(xe.norm());
                let curv = homog_curvature_envelope(*alpha, m) + 2.0 * amplitude.abs();
                rate0.max(0.0) + h * y.norm_squared() * curv
            }
        };
        Ok(bound)
    }

    /// Upper bound on the Hessian operator norm over the ball of radius `radius`.
    pub fn hessian_norm_sup(&self, radius: f64) -> f64 {
        match self {
            PotentialModel::Zero { .. } => 0.0,
            PotentialModel::Gaussian(g) => g.lambda_max,
            PotentialModel::AnisoPower { alphas } => {
                alphas.iter().map(|&a| aniso_curvature_envelope(a, radius)).fold(0.0, f64::max)
            }
            PotentialModel::Logistic(l) => l.data_curvature + l.prior_curvature_envelope(radius),
            PotentialModel::DoubleWell1D { .. } => DOUBLE_WELL_CURVATURE_ABS,
            PotentialModel::HomogeneousPerturbed { alpha, amplitude, .. } => {
                let inner_min = (alpha * (2.0 - alpha / 2.0)).min(0.0).abs();
                homog_curvature_envelope(*alpha, radius).max(inner_min) + 2.0 * amplitude.abs()
            }
        }
    }

    /// Upper bound on sup_{‖z‖ ≤ radius} ‖∇U(z)‖.
    pub fn grad_norm_sup(&self, radius: f64) -> f64 {
        let radius = radius.max(0.0);
        match self {
            PotentialModel::Zero { .. } => 0.0,
            PotentialModel::Gaussian(g) => g.lambda_max * radius,
            PotentialModel::AnisoPower { alphas } => aniso_grad_sup(alphas, radius),
            PotentialModel::DoubleWell1D { .. } => {
                let n = 4000;
                let step = 2.0 * radius / n as f64;
                let best = (0..=n)
                    .map(|k| self.grad(&DVector::from_element(1, -radius + k as f64 * step))[0].abs())
                    .fold(0.0, f64::max);
                best + DOUBLE_WELL_CURVATURE_ABS * step / 2.0
            }
            PotentialModel::HomogeneousPerturbed { alpha, amplitude, .. } => {
                let n = 4000;
                let step = radius / n as f64;
                let best = (0..=n)
                    .map(|k| {
                        let r = k as f64 * step;
                        let s = r * r;
                        (2.0 * homog_q(*alpha, s).1 + 2.0 * amplitude / (1.0 + s)).abs() * r
                    })
                    .fold(0.0, f64::max);
                best + self.hessian_norm_sup(radius) * step / 2.0
            }
            PotentialModel::Logistic(_) => self.scan_grad_sup(radius),
        }
    }

    /// Grid scan over the ball plus a Lipschitz correction from the Hessian bound.
    fn scan_grad_sup(&self, radius: f64) -> f64 {
        let d = self.dim();
        let lip = self.hessian_norm_sup(radius);
        match d {
            1 => {
                let n = 4000;
                let step = 2.0 * radius / n as f64;
                let best = (0..=n)
                    .map(|k| self.grad(&DVector::from_element(1, -radius + k as f64 * step)).norm())
                    .fold(0.0, f64::max);
                best + lip * step / 2.0
            }
            2 => {
                let (nr, nt) = (200, 720);
                let dr = radius / nr as f64;
                let dt = 2.0 * std::f64::consts::PI / nt as f64;
                let mut best: f64 = 0.0;
                for i in 0..=nr {
                    let r = i as f64 * dr;
                    for j in 0..nt {
                        let t = j as f64 * dt;
                        let z = DVector::from_vec(vec![r * t.cos(), r * t.sin()]);
                        best = best.max(self.grad(&z).norm());
                    }
                }
                best + lip * (dr / 2.0 + radius * dt / 2.0)
            }
            _ => {
                // deterministic quasi-random directions; not certified in d ≥ 3
                use rand::SeedableRng;
                use rand_distr::{Distribution, StandardNormal};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
                let nr = 100;
                let mut best: f64 = 0.0;
                for _ in 0..2000 {
                    let mut u = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                    u /= u.norm();
                    for i in 0..=nr {
                        let z = &u * (radius * i as f64 / nr as f64);
                        best = best.max(self.grad(&z).norm());
                    }
                }
                best + lip * radius / (2.0 * nr as f64)
            }
        }
    }
}

/// sup ‖∇U‖ over the ball for the anisotropic power family.
///
/// ‖∇U(z)‖² = Σ φ_i(z_i²) with φ_i(t) = α_i² t (1+t)^{α_i−2} increasing, so the
/// supremum is a resource allocation of t_i ≥ 0 with Σ t_i ≤ R². Solved by
/// dynamic programming on a budget grid, rounding each share up so the result
/// stays an upper bound.
fn aniso_grad_sup(alphas: &[f64], radius: f64) -> f64 {
    let r2 = radius * radius;
    let phi = |a: f64, t: f64| a * a * t * (1.0 + t).powf(a - 2.0);
    if alphas.len() == 1 {
        return phi(alphas[0], r2).sqrt();
    }
    let k = 2000usize;
    let unit = r2 / k as f64;
    let mut best = vec![0.0f64; k + 1];
    for &a in alphas {
        let mut next = vec![0.0f64; k + 1];
        for (b, slot) in next.iter_mut().enumerate() {
            let mut m: f64 = 0.0;
            for u in 0..=b {
                // share of u units, rounded up by one unit
                let t = ((u + 1).min(k) as f64 * unit).min(r2);
                m = m.max(best[b - u] + phi(a, t));
            }
            *slot = m;
        }
        best = next;
    }
    best[k].sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logistic_instance() -> PotentialModel {
        PotentialModel::Logistic(
            LogisticPotential::new(vec![DVector::from_element(1, 1.0)], vec![1.0], 1.0, 3.0).unwrap(),
        )
    }

    fn logistic_2d() -> PotentialModel {
        let data = vec![
            DVector::from_vec(vec![1.0, 0.5]),
            DVector::from_vec(vec![-0.3, 1.2]),
            DVector::from_vec(vec![0.8, -0.9]),
        ];
        PotentialModel::Logistic(LogisticPotential::new(data, vec![1.0, 0.0, 1.0], 1.5, 3.0).unwrap())
    }

    fn catalog() -> Vec<PotentialModel> {
        vec![
            PotentialModel::zero(3).unwrap(),
            PotentialModel::gaussian(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap(),
            PotentialModel::aniso_power(vec![1.5, 3.0, 4.0]).unwrap(),
            logistic_2d(),
            PotentialModel::double_well(0.3).unwrap(),
            PotentialModel::homogeneous_perturbed(2, 3.0, 0.5).unwrap(),
            PotentialModel::homogeneous_perturbed(3, 1.5, -0.2).unwrap(),
        ]
    }

    #[test]
    fn energy_examples() {
        let g = PotentialModel::standard_gaussian(1);
        let (u, gr) = g.energy_and_grad(&DVector::from_element(1, 2.0)).unwrap();
        assert_eq!((u, gr[0]), (2.0, 2.0));
        let z = PotentialModel::zero(2).unwrap();
        let (u, gr) = z.energy_and_grad(&DVector::from_vec(vec![3.0, -1.0])).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(gr.norm(), 0.0);
        let l = logistic_instance();
        let (u, _) = l.energy_and_grad(&DVector::zeros(1)).unwrap();
        assert!((u - (1.0 + 2f64.ln())).abs() < 1e-15);
        assert!(matches!(g.energy_and_grad(&DVector::zeros(2)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn bounce_rate_examples() {
        let g = PotentialModel::standard_gaussian(2);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(g.bounce_rate(&x, &DVector::from_vec(vec![-1.0, 0.0])), 0.0);
        assert_eq!(g.bounce_rate(&x, &DVector::from_vec(vec![1.0, 0.0])), 1.0);
        let l = logistic_instance();
        let h = 1e-6;
        let fd = (l.energy(&DVector::from_element(1, h)) - l.energy(&DVector::from_element(1, -h))) / (2.0 * h);
        let r = l.bounce_rate(&DVector::zeros(1), &DVector::from_element(1, 1.0));
        assert!((r - fd.max(0.0)).abs() < 1e-8);
        // at 0 the slope is σ(0) − 1 = −1/2
        assert_eq!(r, 0.0);
        let back = l.bounce_rate(&DVector::zeros(1), &DVector::from_element(1, -1.0));
        assert!((back - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in catalog() {
            let d = model.dim();
            for _ in 0..2000 {
                let x = DVector::from_fn(d, |_, _| rng.gen_range(-3.0..3.0));
                let g = model.grad(&x);
                for i in 0..d {
                    let h = 1e-5 * (1.0 + x[i].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (model.energy(&xp) - model.energy(&xm)) / (2.0 * h);
                    let scale = g.norm().max(1.0);
                    assert!((fd - g[i]).abs() < 1e-6 * scale, "{model:?} x={x} i={i} fd={fd} g={}", g[i]);
                }
            }
        }
    }

    #[test]
    fn hessians_match_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for model in catalog() {
            let d = model.dim();
            for _ in 0..200 {
                let x = DVector::from_fn(d, |_, _| rng.gen_range(-3.0..3.0));
                let h = model.hessian(&x);
                for i in 0..d {
                    let eps = 1e-6 * (1.0 + x[i].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += eps;
                    xm[i] -= eps;
                    let col = (model.grad(&xp) - model.grad(&xm)) / (2.0 * eps);
                    for j in 0..d {
                        assert!((col[j] - h[(j, i)]).abs() < 1e-5 * h.norm().max(1.0), "{model:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn segment_bound_dominates_grid_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for model in catalog() {
            let d = model.dim();
            for _ in 0..300 {
                let x = DVector::from_fn(d, |_, _| rng.gen_range(-4.0..4.0));
                let y = DVector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0));
                let h = rng.gen_range(0.01..3.0);
                let b = model.segment_rate_bound(&x, &y, h).unwrap();
                for k in 0..=1000 {
                    let s = h * k as f64 / 1000.0;
                    let r = model.bounce_rate(&(&x + &y * s), &y);
                    assert!(r <= b * (1.0 + 1e-12) + 1e-12, "{model:?} r={r} b={b}");
                }
            }
        }
    }

    #[test]
    fn segment_bound_examples() {
        let z = PotentialModel::zero(2).unwrap();
        assert_eq!(z.segment_rate_bound(&DVector::zeros(2), &DVector::from_element(2, 1.0), 1.0).unwrap(), 0.0);
        let g = PotentialModel::standard_gaussian(2);
        let b = g.segment_rate_bound(&DVector::zeros(2), &DVector::from_vec(vec![1.0, 0.0]), 2.0).unwrap();
        assert!(b >= 2.0);
        assert!(g.segment_rate_bound(&DVector::zeros(2), &DVector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn grad_norm_sup_examples() {
        assert_eq!(PotentialModel::zero(2).unwrap().grad_norm_sup(10.0), 0.0);
        assert!((PotentialModel::standard_gaussian(3).grad_norm_sup(3.0) - 3.0).abs() < 1e-12);
        let a = PotentialModel::aniso_power(vec![3.0]).unwrap();
        let grid = (0..=20_000)
            .map(|k| a.grad(&DVector::from_element(1, -2.0 + 4.0 * k as f64 / 20_000.0)).norm())
            .fold(0.0, f64::max);
        let sup = a.grad_norm_sup(2.0);
        assert!(sup >= grid && sup <= grid * 1.05);
    }

    #[test]
    fn grad_norm_sup_is_tight_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let models = vec![
            PotentialModel::aniso_power(vec![1.5, 3.0]).unwrap(),
            PotentialModel::aniso_power(vec![1.3, 1.6]).unwrap(),
            logistic_2d(),
            PotentialModel::double_well(0.3).unwrap(),
            PotentialModel::homogeneous_perturbed(2, 3.0, 0.5).unwrap(),
        ];
        for m in models {
            for &radius in &[0.5, 2.0, 5.0] {
                let sup = m.grad_norm_sup(radius);
                let mut best: f64 = 0.0;
                for _ in 0..20_000 {
                    let mut z = DVector::from_fn(m.dim(), |_, _| rng.gen_range(-1.0..1.0));
                    let n = z.norm();
                    if n > 1.0 || n == 0.0 {
                        continue;
                    }
                    // push most draws to the sphere where the sup usually sits
                    let scale = if rng.gen_bool(0.7) { radius / n } else { radius };
                    z *= scale;
                    best = best.max(m.grad(&z).norm());
                }
                assert!(sup >= best, "{m:?} r={radius} sup={sup} best={best}");
                assert!(sup <= best * 1.05 + 1e-9, "{m:?} r={radius} sup={sup} best={best}");
            }
        }
    }

    #[test]
    fn aniso_a5_ratio_decreases_with_radius() {
        let m = PotentialModel::aniso_power(vec![2.0, 3.0, 4.5]).unwrap();
        let dir = DVector::from_vec(vec![0.6, 0.48, 0.64]);
        let ratio = |r: f64| {
            let x = &dir * r;
            let h = m.hessian(&x);
            h.norm() / m.grad(&x).norm()
        };
        let r = [ratio(10.0), ratio(100.0), ratio(1000.0)];
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialModel::gaussian(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(PotentialModel::aniso_power(vec![1.0]).is_err());
        assert!(LogisticPotential::new(vec![DVector::zeros(1)], vec![0.5], 1.0, 3.0).is_err());
        assert!(LogisticPotential::new(vec![DVector::zeros(1)], vec![1.0], 1.0, 2.0).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec: PotentialSpec = serde_json::from_str(r#"{"kind":"gaussian","precision":[[1.0,0.0],[0.0,2.0]]}"#).unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.dim(), 2);
        let bad = serde_json::from_str::<PotentialSpec>(r#"{"kind":"zero","dim":2,"extra":1}"#);
        assert!(bad.is_err());
    }
}
