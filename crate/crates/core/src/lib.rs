//! Stabilization certificates for parabolic equations `(∂t + H)y = 0`.
//!
//! The crate discretizes three families of `H` (shifted fractional
//! Laplacian, shifted Hermite operator, Schrödinger operator), measures
//! spectral-inequality constants on sets `E`, turns them into explicit
//! weak-observability certificates `(T, α, C)`, synthesizes stabilizing
//! feedback laws and probes claimed certificates for violations.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod certify;
pub mod domain;
pub mod error;
pub mod feedback;
pub mod geometry;
pub mod hash;
pub mod operators;
pub mod probes;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod serde_ext;
pub mod specineq;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations of the generic types.
pub type Domain = domain::GridDomain<f64>;
pub type Function = domain::GridFunction<f64>;
pub type Set = geometry::SetIndicator<f64>;
pub type Operator = operators::OperatorSpec<f64>;
pub type Decomposition = operators::SpectralDecomposition<f64>;
pub type Constants = certify::CriterionConstants<f64>;
pub type CertificateF64 = certify::Certificate<f64>;
pub type ClaimF64 = certify::Claim<f64>;
pub type Feedback = feedback::FeedbackOperator<f64>;
