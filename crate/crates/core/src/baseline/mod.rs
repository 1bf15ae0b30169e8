//! Physics-based filters: the known-parameter SME filter, an unconditional
//! Lindblad filter, and the adaptive filter with online estimation of
//! (ω, γ) and innovation-based switch detection.

mod adaptive;
mod estimators;
mod filter;

pub use adaptive::{adaptive_filter, AdaptiveConfig, AdaptiveRun, Axis, FilterEvent, KnownParams};
pub use estimators::{estimate_gamma, Detector, DetectorConfig, OmegaEstimator};
pub use filter::{exact_filter, filter_step, lindblad_filter, lindblad_rhs, lindblad_rk4_step, run_filter};
