//! Numerical laboratory for the singular-perturbation flame problem
//! `Δu = β_ε(u)`: grid solver, monotonicity functionals, blow-up tools,
//! closed-form references and support-function surface geometry.

// `!(x > 0.0)` is used deliberately so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod cli;
pub mod error;
pub mod exact;
pub mod field;
pub mod fld;
pub mod mesh;
pub mod mollifier;
pub mod quadrature;
pub mod solver;
pub mod spherical;
pub mod spherical_energy;
pub mod suite;
pub mod support_geometry;

pub use error::{Error, Result};
pub use field::{Domain, GridSpec, NodeKind, Probe, ScalarField};
pub use mollifier::BetaProfile;

/// A point or vector in up to three dimensions; unused trailing entries are 0.
pub type Vec3 = [f64; 3];
