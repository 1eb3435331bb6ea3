//! Geometric phases of mixed quantum states under unitary and Lindblad
//! evolutions.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`evolve`] integrates a closed-system or Lindblad model into a
//!    time-sampled density-matrix trajectory.
//! 2. [`spectral`] turns the trajectory into continuous eigenvalue branches
//!    and gauge-fixed eigenvector branches, with the operators `U(t)` and
//!    `C(t)` derived from them.
//! 3. [`ensemble`] builds uniform and nonorthogonal decompositions of the
//!    state from the spectral data.
//! 4. [`phase`] evaluates the phase functionals (kinematic, generalized with
//!    a choice of ancilla transport, discrete amplitude transport, and the
//!    degenerate non-Abelian variant) together with parallel-transport
//!    residual diagnostics.
//!
//! [`scenario`] and [`report`] wrap the pipeline behind scenario files and
//! CSV/JSON reports; [`acceptance`] hosts the end-to-end verification suite
//! used by `geomphase verify` and the integration tests.

pub mod acceptance;
pub mod ensemble;
pub mod error;
pub mod evolve;
pub mod linalg;
pub mod phase;
pub mod report;
pub mod run;
pub mod scenario;
pub mod spectral;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, ErrorKind, Result};
