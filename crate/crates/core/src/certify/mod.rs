//! Weak-observability certificates from spectral and dissipative hypotheses.
//!
//! Given `(c1, a, c2, b, M, δ0)` the explicit constant chain produces
//! `(T, α, C)` such that
//! `‖e^{-TH}φ‖ ≤ C (∫₀ᵀ‖e^{-tH}φ‖²_{L²(E)} dt)^{1/2} + α‖φ‖`.
//! The constants are astronomically conservative, so everything that can
//! overflow is computed as a logarithm.

mod checks;
mod constants;
mod pipeline;

pub use checks::{
    recurrence_check, weak_observability_check, RecurrenceReport, TauResult, WeakObservabilityReport,
    WEAK_OBSERVABILITY_REL_TOL,
};
pub(crate) use checks::{compare, Trajectory};
pub use constants::{build_certificate, Certificate, Claim, CriterionConstants};
pub use pipeline::{certify_end_to_end, spectral_exponent, tau_samples, EndToEnd, PipelineOptions};
