//! Simulation and analysis toolkit for a fiber-coupled heralded
//! single-photon source.
//!
//! The crate is organized along the physical signal chain:
//!
//! - [`dispersion`]: wavelength- and temperature-dependent refractive
//!   indices (Sellmeier models and tabulated materials).
//! - [`qpm`]: quasi-phase-matching solves, SPDC spectra and the offset
//!   calibration against a measured peak.
//! - [`beamoptics`]: Gaussian mode-overlap coupling and dB loss budgets.
//! - [`thinfilm`]: transfer-matrix evaluation of dielectric layer stacks,
//!   substrate-measurement conversion and thickness optimization.
//! - [`pairsim`]: pulsed photon-pair generation, loss, beam splitting and
//!   threshold detection, both as exact click probabilities and as
//!   seeded Monte-Carlo time-tag streams.
//! - [`tagmetrics`]: windowed coincidence counting and the derived
//!   estimators (heralding efficiency, heralded g2, CAR, Klyshko
//!   transmission inference).
//!
//! All computations are deterministic; stochastic operations take an
//! explicit seed and derive per-block sub-seeds via [`seed::derive_seed`].

pub mod beamoptics;
pub mod data;
pub mod dispersion;
pub mod error;
pub mod pairsim;
pub mod qpm;
pub mod seed;
pub mod tagmetrics;
pub mod thinfilm;

pub use error::{Error, Result};
