//! Exact simulation and analysis toolkit for the Bouncy Particle Sampler.
//!
//! The crate covers event-driven simulation with exact thinning, Lyapunov
//! drift verification, coupling-based total variation bounds, a torus toy
//! model, a finite-state Harris contraction calculator and an annealed
//! variant of the sampler for global optimization.

pub mod annealing;
pub mod bps;
pub mod coupling;
pub mod error;
pub mod harris;
pub mod lyapunov;
pub mod par;
pub mod potentials;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod torus;
pub mod velocity;

pub use error::{Error, Result};
