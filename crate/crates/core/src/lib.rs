//! Loss estimation with lossy two-mode squeezed vacuum and photon-number
//! resolving detection.
//!
//! * [`model`]: exact joint photon-number statistics with loss and
//!   Poissonian spurious counts.
//! * [`gaussian`]: covariance matrices, beam-splitter loss and the
//!   closed-form three-parameter quantum Fisher information.
//! * [`fisher`]: classical, observed and benchmark Fisher information,
//!   sensitivities and quantum-advantage crossover curves.
//! * [`mle`]: five-parameter maximum-likelihood fits of count histograms.
//! * [`sim`]: seeded shot simulation, grouping, bootstrap and diagnostics.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod error;
pub mod fisher;
pub mod gaussian;
pub mod linalg;
pub mod mle;
pub mod model;
mod numeric;
pub mod params;
pub mod sim;

pub use error::{Error, Result};
pub use fisher::{FimOptions, FisherMatrix};
pub use mle::{FitOptions, Histogram, MleResult};
pub use model::{JointPnd, apply_dark_counts, lossy_tmsv_pnd, model_pnd};
pub use params::{Cutoff, Param, ParamSet};
