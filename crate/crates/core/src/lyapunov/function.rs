use super::params::{derive_params, DerivedParams, DriftConstants};
use super::phi::{build_phi, PhiFunction};
use crate::bps::{reflect, TestFunction};
use crate::error::{check_dim, Error, Result};
use crate::potentials::PotentialModel;
use crate::velocity::VelocityLaw;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Transformation ψ with Ū = ψ ∘ U.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psi {
    Identity,
    /// u ↦ (1 + u)^ς, ς ∈ (0, 1]; the shift keeps ψ smooth where U vanishes.
    Power { exponent: f64 },
}

/// Velocity weight H in the e^{H(‖y‖)} term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HChoice {
    /// t ↦ t²
    Square,
    /// t ↦ η t²
    Scaled { eta: f64 },
}

/// Scale function ℓ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ell {
    One,
    /// x ↦ 1/(1 + ‖∇Ū(x)‖)
    InverseGrad,
    Constant { value: f64 },
}

/// Whether V carries the e^{H(‖y‖)} term (needed for unbounded velocities).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VForm {
    #[default]
    Full,
    BoundedVelocity,
}

impl Psi {
    /// (ψ, ψ', ψ'') at u.
    fn derivs(&self, u: f64) -> (f64, f64, f64) {
        match *self {
            Psi::Identity => (u, 1.0, 0.0),
            Psi::Power { exponent: s } => {
                let base = 1.0 + u;
                (base.powf(s), s * base.powf(s - 1.0), s * (s - 1.0) * base.powf(s - 2.0))
            }
        }
    }
}

impl HChoice {
    pub fn eta(&self) -> f64 {
        match *self {
            HChoice::Square => 1.0,
            HChoice::Scaled { eta } => eta,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eta() * t * t
    }

    /// Largest speed t with H(t) ≤ level.
    pub fn inverse(&self, level: f64) -> f64 {
        (level.max(0.0) / self.eta()).sqrt()
    }
}

/// Serializable description of V before the refresh rate is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub psi: Psi,
    pub h: HChoice,
    pub ell: Ell,
    #[serde(default)]
    pub form: VForm,
    pub constants: DriftConstants,
    /// Radius beyond which the constants were measured.
    #[serde(default)]
    pub radius: f64,
}

impl LyapunovConfig {
    fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if let Psi::Power { exponent } = self.psi {
            if !(exponent > 0.0 && exponent <= 1.0) {
                return Err(Error::InvalidParameter(format!("ψ exponent must lie in (0, 1], got {exponent}")));
            }
        }
        if let HChoice::Scaled { eta } = self.h {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter(format!("η must be positive, got {eta}")));
            }
        }
        if let Ell::Constant { value } = self.ell {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!("constant ℓ must be positive, got {value}")));
            }
        }
        if !(self.radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be non-negative, got {}", self.radius)));
        }
        Ok(())
    }
}

/// Quantities of V that depend on x only.
#[derive(Debug, Clone)]
pub struct XTerms {
    pub u: f64,
    pub grad_u: DVector<f64>,
    pub ubar: f64,
    pub grad_ubar: DVector<f64>,
    pub hess_ubar: DMatrix<f64>,
    pub ell: f64,
    pub grad_ell: DVector<f64>,
}

/// Potential-side terms Ū, ∇Ū, ∇²Ū, ℓ, ∇ℓ at x.
pub fn x_terms(psi: Psi, ell: Ell, model: &PotentialModel, x: &DVector<f64>) -> XTerms {
    let u = model.energy(x);
    let grad_u = model.grad(x);
    let (p0, p1, p2) = psi.derivs(u);
    let grad_ubar = &grad_u * p1;
    let mut hess_ubar = model.hessian(x) * p1;
    if p2 != 0.0 {
        hess_ubar += &grad_u * grad_u.transpose() * p2;
    }
    let d = x.len();
    let (l, grad_ell) = match ell {
        Ell::One => (1.0, DVector::zeros(d)),
        Ell::Constant { value } => (value, DVector::zeros(d)),
        Ell::InverseGrad => {
            let n = grad_ubar.norm();
            let l = 1.0 / (1.0 + n);
            let g = if n > 0.0 { &hess_ubar * &grad_ubar * (-l * l / n) } else { DVector::zeros(d) };
            (l, g)
        }
    };
    XTerms { u, grad_u, ubar: p0, grad_ubar, hess_ubar, ell: l, grad_ell }
}

/// V together with its derived constants and profile φ.
#[derive(Debug, Clone)]
pub struct LyapunovSpec {
    config: LyapunovConfig,
    refresh_rate: f64,
    params: DerivedParams,
    phi: PhiFunction,
}

/// V(x, y) in log scale and the ratio AV/V, so that large exponents stay finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftValue {
    pub log_v: f64,
    pub ratio: f64,
}

impl DriftValue {
    pub fn v(&self) -> f64 {
        self.log_v.exp()
    }

    pub fn av(&self) -> f64 {
        self.ratio * self.v()
    }
}

fn log_add_exp(p: f64, q: f64) -> f64 {
    let m = p.max(q);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((p - m).exp() + (q - m).exp()).ln()
}

impl LyapunovSpec {
    pub fn new(config: LyapunovConfig, refresh_rate: f64) -> Result<Self> {
        config.validate()?;
        let params = derive_params(&config.constants, refresh_rate)?;
        let phi = build_phi(params.a, params.b, params.c, params.eps)?;
        Ok(LyapunovSpec { config, refresh_rate, params, phi })
    }

    pub fn config(&self) -> &LyapunovConfig {
        &self.config
    }

    pub fn refresh_rate(&self) -> f64 {
        self.refresh_rate
    }

    pub fn params(&self) -> &DerivedParams {
        &self.params
    }

    pub fn phi(&self) -> &PhiFunction {
        &self.phi
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa
    }

    pub fn x_terms(&self, model: &PotentialModel, x: &DVector<f64>) -> XTerms {
        x_terms(self.config.psi, self.config.ell, model, x)
    }

    /// 2/(r c₁)
    fn base_scale(&self) -> f64 {
        2.0 / (self.config.constants.r * self.config.constants.c1)
    }

    /// Scale 2ℓ(x)/(r c₁) of the φ argument.
    fn arg_scale(&self, t: &XTerms) -> f64 {
        self.base_scale() * t.ell
    }

    /// Whether y belongs to A_x = {H(‖y‖) ≤ 3Ū(x)}.
    pub fn in_a_x(&self, model: &PotentialModel, x: &DVector<f64>, y: &DVector<f64>) -> bool {
        self.config.h.eval(y.norm()) <= 3.0 * self.x_terms(model, x).ubar
    }

    /// log V(x, y).
    pub fn log_v(&self, model: &PotentialModel, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let t = self.x_terms(model, x);
        self.log_v_with(&t, y)
    }

    fn log_v_with(&self, t: &XTerms, y: &DVector<f64>) -> f64 {
        let s = self.arg_scale(t) * y.dot(&t.grad_ubar);
        let head = self.params.kappa * t.ubar + self.phi.value(s).ln();
        match self.config.form {
            VForm::Full => log_add_exp(head, self.config.h.eval(y.norm())),
            VForm::BoundedVelocity => head,
        }
    }

    /// V(x, y) = e^{κŪ(x)} φ(2ℓ(x)⟨y, ∇Ū(x)⟩/(r c₁)) + e^{H(‖y‖)}.
    pub fn eval_v(&self, model: &PotentialModel, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.log_v(model, x, y).exp()
    }

    /// ∇ₓV(x, y) for fixed y.
    pub fn grad_x_v(&self, model: &PotentialModel, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let t = self.x_terms(model, x);
        let k = self.arg_scale(&t);
        let theta = y.dot(&t.grad_ubar);
        let s = k * theta;
        let ds = (&t.hess_ubar * y * t.ell + &t.grad_ell * theta) * self.base_scale();
        let scale = (self.params.kappa * t.ubar).exp();
        (&t.grad_ubar * (self.params.kappa * self.phi.value(s)) + ds * self.phi.deriv(s)) * scale
    }

    /// Binds V to a velocity law, precomputing ∫ e^{H(‖w‖)} μ_v(dw).
    pub fn drift_evaluator<'a>(&'a self, model: &'a PotentialModel, law: &'a VelocityLaw) -> Result<DriftEvaluator<'a>> {
        check_dim(model.dim(), law.dim())?;
        let log_h_moment = match (self.config.form, law) {
            (VForm::BoundedVelocity, VelocityLaw::Gaussian(_)) => {
                return Err(Error::SpecMismatch("bounded-velocity form needs a bounded velocity law".into()))
            }
            (VForm::BoundedVelocity, _) => f64::NEG_INFINITY,
            (VForm::Full, VelocityLaw::Gaussian(g)) => {
                let eta = self.config.h.eta();
                let top = g.eigenvalues().max();
                if 2.0 * eta * top >= 1.0 {
                    return Err(Error::SpecMismatch(format!(
                        "∫ exp(η‖w‖²) diverges: 2η λ_max = {} ≥ 1",
                        2.0 * eta * top
                    )));
                }
                g.eigenvalues().iter().map(|l| -0.5 * (1.0 - 2.0 * eta * l).ln()).sum()
            }
            (VForm::Full, _) => {
                let h = self.config.h;
                law.radial_expectation(|t| h.eval(t).exp()).expect("bounded law").ln()
            }
        };
        Ok(DriftEvaluator { spec: self, model, law, log_h_moment })
    }
}

/// V bound to a potential and a velocity law; evaluates AV exactly.
#[derive(Debug, Clone, Copy)]
pub struct DriftEvaluator<'a> {
    spec: &'a LyapunovSpec,
    model: &'a PotentialModel,
    law: &'a VelocityLaw,
    log_h_moment: f64,
}

impl<'a> DriftEvaluator<'a> {
    pub fn spec(&self) -> &LyapunovSpec {
        self.spec
    }

    pub fn model(&self) -> &PotentialModel {
        self.model
    }

    pub fn law(&self) -> &VelocityLaw {
        self.law
    }

    /// log ∫ e^{H(‖w‖)} μ_v(dw), or −∞ for the bounded-velocity form.
    pub fn log_h_moment(&self) -> f64 {
        self.log_h_moment
    }

    /// ∫ φ(2ℓ(x)⟨∇Ū(x), w⟩/(r c₁)) μ_v(dw).
    pub fn refreshed_phi(&self, t: &XTerms) -> f64 {
        let g = &t.grad_ubar * self.spec.arg_scale(t);
        let phi = &self.spec.phi;
        self.law.projected_expectation(&g, |s| phi.value(s), &phi.breakpoints())
    }

    /// The bracket J(x, y) with AV = e^{κŪ} J + λ(∫e^{H} dμ_v − e^{H(‖y‖)}).
    pub fn j(&self, t: &XTerms, y: &DVector<f64>) -> f64 {
        let spec = self.spec;
        let phi = &spec.phi;
        let k = spec.arg_scale(t);
        let theta = y.dot(&t.grad_ubar);
        let s = k * theta;
        let phis = phi.value(s);
        let transport = spec.params.kappa * theta * phis
            + phi.deriv(s) * spec.base_scale() * (t.ell * y.dot(&(&t.hess_ubar * y)) + theta * t.grad_ell.dot(y));
        let rate = y.dot(&t.grad_u).max(0.0);
        let bounce = if rate > 0.0 {
            let s_r = k * reflect(&t.grad_u, y).dot(&t.grad_ubar);
            rate * (phi.value(s_r) - phis)
        } else {
            0.0
        };
        let refresh = spec.refresh_rate * (self.refreshed_phi(t) - phis);
        transport + bounce + refresh
    }

    /// log V and AV/V at (x, y).
    pub fn drift(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DriftValue> {
        check_dim(self.model.dim(), x.len())?;
        check_dim(self.model.dim(), y.len())?;
        let t = self.spec.x_terms(self.model, x);
        let log_v = self.spec.log_v_with(&t, y);
        let e = self.spec.params.kappa * t.ubar;
        let mut ratio = self.j(&t, y) * (e - log_v).exp();
        if self.spec.config.form == VForm::Full {
            let h = self.spec.config.h.eval(y.norm());
            ratio += self.spec.refresh_rate * ((self.log_h_moment - log_v).exp() - (h - log_v).exp());
        }
        Ok(DriftValue { log_v, ratio })
    }

    /// AV(x, y).
    pub fn drift_residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        Ok(self.drift(x, y)?.av())
    }
}

/// V as a test function for the generic generator.
pub struct VTestFunction<'a> {
    pub spec: &'a LyapunovSpec,
    pub model: &'a PotentialModel,
}

impl TestFunction for VTestFunction<'_> {
    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.spec.eval_v(self.model, x, y)
    }

    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.spec.grad_x_v(self.model, x, y)
    }
}
