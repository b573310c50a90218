//! Stochastic phase-space toolkit for estimating the quantum Fisher
//! information (QFI) of bosonic parameter-encoding protocols.
//!
//! The pipeline: sample initial phase-space points from a Gaussian Wigner
//! distribution ([`phase_space`]), integrate each sample forward through a
//! preparation + encoding protocol at two nearby parameter values, rewind
//! both at the operating value ([`dynamics`], [`models`]), and combine the
//! resulting parametric derivatives with the analytic gradient of the
//! initial distribution into a Monte Carlo QFI estimate ([`estimator`]).
//! Symmetric-ordering moment estimators ([`observables`]) and an exact
//! truncated Fock-space reference ([`fock`]) provide independent
//! cross-checks, and [`scenario`] orchestrates reproducible CSV-producing
//! runs.

pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod fock;
pub mod models;
pub mod numeric;
pub mod observables;
pub mod phase_space;
pub mod scenario;

pub use error::{Error, Result};
