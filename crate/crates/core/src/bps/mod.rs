//! Exact event-driven simulation of the Bouncy Particle Sampler.

mod generator;
mod inversion;
mod simulate;
mod thinning;
mod trajectory;

pub use generator::{apply_generator, FnBundle, GeneratorValue, TestFunction, VelocityIntegrator};
pub use inversion::{integrated_rate, invert_integrated_rate};
pub use simulate::{next_bounce, simulate, simulate_global};
pub use trajectory::Trajectory;
pub(crate) use thinning::first_arrival;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Position–velocity pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl KineticState {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        KineticState { x, y }
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        KineticState { x: DVector::from_column_slice(x), y: DVector::from_column_slice(y) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Refresh,
    Bounce,
}

/// A jump of the process. `position` is the (continuous) position at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub position: DVector<f64>,
    pub velocity_after: DVector<f64>,
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub refresh_rate: f64,
    pub horizon: f64,
    /// Initial thinning window.
    #[serde(default = "default_h")]
    pub thinning_step: f64,
    /// Largest thinning window after adaptive doubling.
    #[serde(default = "default_h_max")]
    pub thinning_step_max: f64,
    /// Relative tolerance for integrated-rate inversion.
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    #[serde(default = "default_event_cap")]
    pub event_cap: usize,
}

fn default_h() -> f64 {
    0.5
}
fn default_h_max() -> f64 {
    8.0
}
fn default_root_tol() -> f64 {
    1e-10
}
fn default_event_cap() -> usize {
    50_000_000
}

impl SimConfig {
    pub fn new(refresh_rate: f64, horizon: f64) -> Self {
        SimConfig {
            refresh_rate,
            horizon,
            thinning_step: default_h(),
            thinning_step_max: default_h_max(),
            root_tol: default_root_tol(),
            event_cap: default_event_cap(),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.refresh_rate >= 0.0) || !(self.horizon > 0.0) || !(self.thinning_step > 0.0) {
            return Err(crate::Error::InvalidParameter("need refresh_rate ≥ 0, horizon > 0, thinning_step > 0".into()));
        }
        if self.thinning_step_max < self.thinning_step {
            return Err(crate::Error::InvalidParameter("thinning_step_max below thinning_step".into()));
        }
        Ok(())
    }
}

/// R(x, y): reflection of y across the hyperplane orthogonal to ∇U(x).
/// A vanishing gradient leaves y unchanged.
pub fn reflect(grad: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let nn = grad.norm_squared();
    if nn == 0.0 {
        return y.clone();
    }
    let coef = 2.0 * y.dot(grad) / nn;
    y - grad * coef
}
