//! Limiting spectra, linear-spectral-statistic CLT and a high-dimensional
//! white-noise test for separable sample covariance matrices
//! `S = (1/n) T1 X T2 X* T1*`.
//!
//! Modules, bottom up:
//!
//! * [`model`]: entry laws, separable models, linear processes, lag
//!   autocovariances and shift matrices.
//! * [`spectra`]: spectral measures, ESDs, moment and resolvent queries.
//! * [`lsd`]: the fixed-point solver for `(m, g1, g2)`, density recovery and
//!   support bounds.
//! * [`clt`]: mean and covariance of linear spectral statistics by contour
//!   integration.
//! * [`whitenoise`]: the lag-τ statistic and its null calibration.
//! * [`montecarlo`]: seeded replication engine for size/power tables.

pub mod error;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod spectra;
pub mod func;
pub mod lsd;
pub mod clt;
pub mod whitenoise;
pub mod montecarlo;

pub use error::{Error, Result};
