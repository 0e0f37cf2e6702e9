//! Pseudo-spectral simulator and structure verifier for a regularized quantum
//! Navier-Stokes system on the periodic torus.
//!
//! The crate is organized bottom-up: [`params`] and [`coeffs`] hold the scalar
//! model, [`fields`] provides spectral calculus on uniform grids, [`tensors`]
//! assembles the viscous and capillarity fluxes, [`dynamics`] advances states in
//! the primitive and effective-velocity formulations, [`diagnostics`] evaluates
//! the energy/entropy ledgers and [`verify`] turns the underlying identities
//! into checkable reports.

pub mod coeffs;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod params;
pub mod tensors;
pub mod verify;

pub use coeffs::CoefficientSet;
pub use error::{QnsError, Result};
pub use params::{check_admissible, derived_mu, epsilon_f, DerivedConstants, ModelParams};
