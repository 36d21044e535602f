//! Lyapunov function V for the sampler, its constants and numerical drift checks.

mod calibrate;
mod fit;
mod function;
mod params;
mod phi;
mod probes;

pub use calibrate::{calibrate, default_r_grid, measure_constants, Calibration, ScanOptions};
pub use fit::{fit_drift_constants, sample_drift, DriftFit, DriftSample, DriftSampling, Violation};
pub use function::{
    x_terms, DriftEvaluator, DriftValue, Ell, HChoice, LyapunovConfig, LyapunovSpec, Psi, VForm, VTestFunction, XTerms,
};
pub use params::{derive_params, DerivedParams, DriftConstants};
pub use phi::{build_phi, BlendReport, PhiFunction};
pub use probes::{
    aniso_a4_interval, aniso_a5_interval, find_a4, find_a5, hessian_norm, probe_a3, probe_a4, probe_a5, scan_directions,
    A3Report, PowerReport, ProbeGrid,
};
