//! Electromagnetic source localization from boundary electric-field
//! measurements.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`forward`] synthesizes boundary data radiated by a current density
//!    through the free-space dyadic Green's function ([`greens`]).
//! 2. [`imaging`] back-propagates conjugated data (phase conjugation) to
//!    build single-frequency and broadband images of the source.
//! 3. [`inverse`] refines the finite-frequency images by l1-regularized
//!    least squares solved with FISTA and backtracking.
//!
//! [`io`] holds the scenario schema, the on-disk containers and the command
//! drivers used by the `emloc` binary; [`validation`] gathers the numerical
//! self-checks reported by `emloc validate`.

pub mod error;
pub mod field;
pub mod forward;
pub mod geometry;
pub mod greens;
pub mod imaging;
pub mod inverse;
pub mod io;
pub mod validation;

pub use error::{Error, Result};
