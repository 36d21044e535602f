use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Geometric constants of the drift construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub r: f64,
    pub delta: f64,
}

impl DriftConstants {
    pub fn new(c1: f64, c2: f64, c3: f64, c4: f64, r: f64, delta: f64) -> Result<Self> {
        let k = DriftConstants { c1, c2, c3, c4, r, delta };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("r", self.r),
            ("delta", self.delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Band constants, exponent and slack of V, with the compatibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kappa: f64,
    pub eps: f64,
    pub condition13: bool,
    /// Left side of the compatibility inequality.
    pub lhs13: f64,
    /// Right side of the compatibility inequality.
    pub rhs13: f64,
}

/// The two bracketed factors shared by a, κ and the compatibility condition.
pub(crate) fn factors(k: &DriftConstants, lambda: f64) -> (f64, f64) {
    let first = (1.0 / 3.0f64).min(lambda * k.delta * k.r * k.c1 / (16.0 * k.c4));
    let second = (k.c3 / (4.0 * k.c2)).min((lambda * k.delta * k.c3 / (100.0 * k.r * k.c1)).sqrt());
    (first, second)
}

/// Left side of the compatibility inequality.
pub(crate) fn lhs13(k: &DriftConstants, lambda: f64) -> f64 {
    let rc1 = k.r * k.c1;
    (16.0 * lambda * k.c2 / rc1).max(64.0 * k.c4 * k.c2 / (rc1 * rc1))
}

/// Evaluates a, b, c, κ, ε and the compatibility condition for refresh rate `lambda`.
pub fn derive_params(k: &DriftConstants, lambda: f64) -> Result<DerivedParams> {
    k.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("refresh rate must be positive, got {lambda}")));
    }
    let (first, second) = factors(k, lambda);
    let a = 1.0f64.min(1.0 / (first * second));
    let ba = a * first;
    let b = a + ba;
    let kappa = ba * second;
    let cb = (k.delta * lambda * a / (4.0 * (4.0 * k.c4 / (k.r * k.c2) + 2.0 * lambda)))
        .min(ba)
        .min(ba * k.c3 / (4.0 * kappa * k.c2))
        .min(k.delta * b / 4.0);
    let c = b + cb;
    let eps = 0.5f64.min(cb).min(kappa * k.r * k.c1 / 4.0).min(lambda * k.c2);
    let lhs = lhs13(k, lambda);
    let rhs = first * second;
    Ok(DerivedParams { a, b, c, kappa, eps, condition13: lhs <= rhs, lhs13: lhs, rhs13: rhs })
}
