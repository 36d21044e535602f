//! Coupling constructions and the total variation bounds they certify.

mod alpha;
mod bound;
mod mirror;
mod reflection;

pub use alpha::{alpha_tilde, AlphaTilde, AlphaTildeTable};
pub use bound::{merge_lower_bound, tv_from_counts, tv_upper_from_merges, CutoffBound, MergeBound, TvEstimate, CUTOFF_MULTIPLES};
pub use mirror::{couple_batch, mirror_couple, CoupledRun, CouplingScenario, MergeReport};
pub use reflection::{reflect_gaussian_pair, reflect_whitened, GaussianPair};
