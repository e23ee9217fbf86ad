//! Two-mode sideband-pumped self-oscillation.
//!
//! The lower mode is driven parametrically through the upper mode by a pump
//! at the sum frequency. Above threshold both modes self-oscillate with a
//! phase sum locked to the pump phase; the phase difference diffuses freely.
//! This crate provides the slow-flow model, integrators, linear stability of
//! the oscillating state, pump-phase feedback that pins one mode's phase, and
//! spectral and statistical analysis of the resulting records.

pub mod error;
pub mod model;
pub mod slowflow;
pub mod stability;
pub mod controller;
pub mod analysis;

pub use error::{Error, Result};
pub use model::*;
