//! Simulation and parameter extraction for two longitudinally coupled
//! superconducting resonators.
//!
//! - [`circuit`] maps device geometry to resonance, flux gradient, zero-point
//!   flux, couplings and Kerr constant.
//! - [`spectra`] synthesizes transmission, upconversion and normal-mode spectra.
//! - [`oracle`] re-derives the steady state by linear solve and by time-domain
//!   integration.
//! - [`fitting`] is a Levenberg-Marquardt engine plus the fit models applied
//!   to measured spectra.
//! - [`pipelines`] runs the flux-sweep, two-tone, avoided-crossing and
//!   power-sweep experiments end to end on synthetic data.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod error;
pub mod fitting;
pub mod io;
pub mod oracle;
pub mod pipelines;
pub mod spectra;
pub mod units;

pub use circuit::{BiasPoint, Circuit, DeviceParams, PhysicalConstants};
pub use error::{Error, Result};
pub use fitting::{FitConfig, FitResult};
pub use spectra::{CoupledModeParams, NoiseSpec, SpectrumTrace};
