//! Symmetric α-stable random vectors, linear fractional stable motion and
//! wavelet-based self-similarity estimation.
//!
//! The crate is organised bottom-up:
//!
//! - [`stable`]: SαS variates, finite kernels, α-norms and stable integrals.
//! - [`depmeas`]: dependence measures `[ξ,η]₁`, `[ξ,η]₂`, the gaps `U` and `I`
//!   with their derivatives, ε₁/ε₂ and moving-average kernel pairs.
//! - [`wavelet`], [`lfsm`], [`dwt`]: compactly supported wavelets, LFSM
//!   synthesis, the kernel `h` and wavelet coefficients by the stable-integral
//!   and the filter-bank routes.
//! - [`estimators`]: Ĥ, Ĥ* and the plug-in asymptotic variance.
//! - [`harness`]: Monte-Carlo and quadrature verification of the covariance
//!   bounds and central limit theorems.

pub mod conv;
pub mod depmeas;
pub mod dwt;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod lfsm;
pub mod quad;
pub mod rng;
pub mod stable;
pub mod stats;
pub mod wavelet;

pub use error::{Error, Result};
pub use rng::RngStream;
