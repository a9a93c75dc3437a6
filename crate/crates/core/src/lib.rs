//! Spectral-edge numerics for sample covariance matrices of elliptically
//! distributed data.
//!
//! * [`model`]: population spectra, radius laws and model specifications.
//! * [`sampler`]: reproducible random generation.
//! * [`mp_law`]: the Marčenko–Pastur edge `(c, λ₊, γ)` and Stieltjes transform.
//! * [`spectral`]: eigenvalues and sample statistics.
//! * [`tw_reference`]: Tracy–Widom table and GOE calibration.
//! * [`experiments`]: Monte-Carlo drivers and result persistence.

pub mod error;
pub mod experiments;
pub mod model;
pub mod mp_law;
pub mod parallel;
pub mod sampler;
pub mod spectral;
pub mod stats;
pub mod tw_reference;

pub use error::{Error, Result};
