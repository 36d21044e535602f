//! TOML experiment configs, one shape per subcommand. Unknown keys are rejected.

use anyhow::{bail, Result};
use bouncy::annealing::CoolingSchedule;
use bouncy::bps::KineticState;
use bouncy::lyapunov::{Ell, HChoice, Psi, ScanOptions, VForm};
use bouncy::potentials::PotentialSpec;
use bouncy::velocity::VelocitySpec;
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(toml::from_str(text)?)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> Result<KineticState> {
        if self.x.len() != dim || self.y.len() != dim {
            bail!("initial state must have dimension {dim}, got x: {}, y: {}", self.x.len(), self.y.len());
        }
        Ok(KineticState::from_slices(&self.x, &self.y))
    }
}

fn one() -> usize {
    1
}

fn default_batches() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub seed: Option<u64>,
    pub potential: PotentialSpec,
    pub velocity: VelocitySpec,
    pub refresh_rate: f64,
    pub horizon: f64,
    pub initial: StateSpec,
    #[serde(default = "one")]
    pub replicas: usize,
    /// Batches for the single-replica standard error.
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Write the event skeleton of replica 0.
    #[serde(default)]
    pub write_events: bool,
}

fn default_radius() -> f64 {
    20.0
}
fn default_annuli() -> usize {
    10
}
fn default_per_annulus() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub seed: Option<u64>,
    pub potential: PotentialSpec,
    pub velocity: VelocitySpec,
    pub refresh_rate: f64,
    pub psi: Psi,
    pub h: HChoice,
    pub ell: Ell,
    #[serde(default)]
    pub form: VForm,
    #[serde(default)]
    pub scan: Option<ScanOptions>,
    /// Candidate r values; defaults to fractions of the speed scale.
    #[serde(default)]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default = "default_radius")]
    pub max_radius: f64,
    #[serde(default = "default_annuli")]
    pub annuli: usize,
    #[serde(default = "default_per_annulus")]
    pub per_annulus: usize,
    /// Cap on A₂ as a multiple of the largest sampled V.
    #[serde(default = "default_cap_factor")]
    pub a2_cap_factor: f64,
}

fn default_cap_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleConfig {
    pub seed: Option<u64>,
    pub potential: PotentialSpec,
    /// Must be a Gaussian law.
    pub velocity: VelocitySpec,
    pub refresh_rate: f64,
    pub first: StateSpec,
    pub second: StateSpec,
    pub compact_radius: f64,
    pub horizons: Vec<f64>,
    pub runs: usize,
    pub bound_samples: usize,
    #[serde(default)]
    pub tail_cutoff: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub dims: Vec<usize>,
    pub epsilon: f64,
    pub runs: usize,
    pub t_cap: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    pub seed: Option<u64>,
    pub dim: usize,
    pub eta: f64,
    pub refresh_rate: f64,
    pub horizons: Vec<f64>,
    pub runs: usize,
    pub bound_samples: usize,
    #[serde(default)]
    pub scaling: Option<ScalingSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealFileConfig {
    pub seed: Option<u64>,
    pub potential: PotentialSpec,
    pub velocity: VelocitySpec,
    pub refresh_rate: f64,
    pub schedule: CoolingSchedule,
    pub eta: f64,
    pub initial: StateSpec,
    pub horizons: Vec<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub kernel: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarrisConfig {
    pub seed: Option<u64>,
    /// Custom chain; the bundled five-state chain when absent.
    #[serde(default)]
    pub chain: Option<ChainSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    pub seed: Option<u64>,
    pub dim: usize,
    pub r: Vec<f64>,
    /// Cutoffs M; `inf` is allowed.
    pub m: Vec<f64>,
    /// Monte Carlo draws of the coupling event per cell; 0 skips the check.
    #[serde(default)]
    pub mc_draws: usize,
}
