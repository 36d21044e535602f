use super::reflect;
use crate::potentials::PotentialModel;
use crate::rng::ChainSeed;
use crate::velocity::VelocityLaw;
use nalgebra::DVector;

/// A test function f(x, y) together with its x-gradient.
pub trait TestFunction: Sync {
    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64;
    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;
}

/// Closure pair implementing [`TestFunction`].
pub struct FnBundle<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> TestFunction for FnBundle<F, G>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64 + Sync,
    G: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Sync,
{
    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (self.f)(x, y)
    }

    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        (self.grad)(x, y)
    }
}

/// How ∫ h(w) μ_v(dw) is evaluated: exactly for spheres in d ≤ 2,
/// by Monte Carlo with a fixed stream otherwise.
#[derive(Debug, Clone)]
pub struct VelocityIntegrator {
    pub mc_draws: usize,
    pub circle_nodes: usize,
    pub seed: u64,
}

impl Default for VelocityIntegrator {
    fn default() -> Self {
        VelocityIntegrator { mc_draws: 100_000, circle_nodes: 1024, seed: 0x0123_4567 }
    }
}

impl VelocityIntegrator {
    /// Returns (estimate, standard error); the error is 0 for deterministic rules.
    pub fn integrate<H: Fn(&DVector<f64>) -> f64>(&self, law: &VelocityLaw, h: H) -> (f64, f64) {
        match law {
            VelocityLaw::UniformSphere { dim: 1, radius } => {
                (0.5 * (h(&DVector::from_element(1, *radius)) + h(&DVector::from_element(1, -radius))), 0.0)
            }
            VelocityLaw::UniformSphere { dim: 2, radius } => {
                let n = self.circle_nodes;
                let sum: f64 = (0..n)
                    .map(|k| {
                        let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                        h(&DVector::from_vec(vec![radius * a.cos(), radius * a.sin()]))
                    })
                    .sum();
                (sum / n as f64, 0.0)
            }
            _ => {
                let mut rng = ChainSeed::new(self.seed, 0).stream(crate::rng::Clock::Aux(0));
                let vals: Vec<f64> = (0..self.mc_draws).map(|_| h(&law.sample(&mut rng))).collect();
                crate::stats::mean_se(&vals)
            }
        }
    }
}

/// Generator value with the standard error of its μ_v-integral part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorValue {
    pub value: f64,
    pub se: f64,
}

/// Af(x,y) = ⟨y, ∇ₓf⟩ + ⟨y, ∇U⟩₊ (f(x, R(x,y)) − f(x,y)) + λ_r (∫ f(x,w) μ_v(dw) − f(x,y)).
pub fn apply_generator(
    model: &PotentialModel,
    law: &VelocityLaw,
    refresh_rate: f64,
    f: &dyn TestFunction,
    x: &DVector<f64>,
    y: &DVector<f64>,
    integrator: &VelocityIntegrator,
) -> GeneratorValue {
    let fxy = f.value(x, y);
    let transport = y.dot(&f.grad_x(x, y));
    let g = model.grad(x);
    let rate = y.dot(&g).max(0.0);
    let bounce = if rate > 0.0 { rate * (f.value(x, &reflect(&g, y)) - fxy) } else { 0.0 };
    let (refresh, se) = if refresh_rate > 0.0 {
        let (m, se) = integrator.integrate(law, |w| f.value(x, w));
        (refresh_rate * (m - fxy), refresh_rate * se)
    } else {
        (0.0, 0.0)
    };
    GeneratorValue { value: transport + bounce + refresh, se }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_harmonic() {
        let m = PotentialModel::standard_gaussian(2);
        let law = VelocityLaw::standard_gaussian(2);
        let one = FnBundle { f: |_: &DVector<f64>, _: &DVector<f64>| 1.0, grad: |x: &DVector<f64>, _: &DVector<f64>| DVector::zeros(x.len()) };
        let x = DVector::from_vec(vec![0.4, -1.0]);
        let y = DVector::from_vec(vec![1.0, 0.2]);
        let v = apply_generator(&m, &law, 1.3, &one, &x, &y, &VelocityIntegrator::default());
        assert!(v.value.abs() < 1e-15);
    }

    #[test]
    fn linear_in_x_gives_velocity() {
        let m = PotentialModel::standard_gaussian(2);
        let law = VelocityLaw::sphere(2, 1.0).unwrap();
        let f = FnBundle { f: |x: &DVector<f64>, _: &DVector<f64>| x[0], grad: |x: &DVector<f64>, _: &DVector<f64>| DVector::from_fn(x.len(), |i, _| if i == 0 { 1.0 } else { 0.0 }) };
        let x = DVector::from_vec(vec![0.4, -1.0]);
        let y = DVector::from_vec(vec![0.6, 0.8]);
        let v = apply_generator(&m, &law, 1.0, &f, &x, &y, &VelocityIntegrator::default());
        assert!((v.value - 0.6).abs() < 1e-12);
    }

    #[test]
    fn velocity_observable_in_one_dimension() {
        let m = PotentialModel::standard_gaussian(1);
        let law = VelocityLaw::standard_gaussian(1);
        let f = FnBundle { f: |_: &DVector<f64>, y: &DVector<f64>| y[0], grad: |_: &DVector<f64>, _: &DVector<f64>| DVector::zeros(1) };
        let v = apply_generator(&m, &law, 1.0, &f, &DVector::from_element(1, 1.0), &DVector::from_element(1, 1.0), &VelocityIntegrator::default());
        // ∫ w dμ_v = 0 up to Monte Carlo error
        assert!((v.value + 3.0).abs() < 4.0 * v.se + 1e-12, "{v:?}");
        assert!(v.se > 0.0 && v.se < 0.01);
        let sphere = VelocityLaw::sphere(1, 1.0).unwrap();
        let exact = apply_generator(&m, &sphere, 1.0, &f, &DVector::from_element(1, 1.0), &DVector::from_element(1, 1.0), &VelocityIntegrator::default());
        assert_eq!(exact.value, -3.0);
        assert_eq!(exact.se, 0.0);
    }
}
