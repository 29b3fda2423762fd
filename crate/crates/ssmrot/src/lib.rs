//! Spectral-submanifold (SSM) reduced-order models for geometrically
//! nonlinear rotating structures with Coriolis and centrifugal forces.
//!
//! The pipeline mirrors the usual workflow for this class of problems:
//!
//! 1. build or load a second-order model `M ü + (C+G) u̇ + F_int(u) = f_cen + f_ext`
//!    ([`model`]),
//! 2. solve the centrifugal static equilibrium and shift the system to it
//!    ([`model::solve_static_equilibrium`], [`model::shift_to_equilibrium`]),
//! 3. embed in first-order form and solve the generalized eigenproblem with
//!    biorthonormal left/right eigenvectors ([`spectral`]),
//! 4. compute the SSM expansion order-by-order, non-intrusively, from black-box
//!    force evaluations ([`ssm`]),
//! 5. extract backbone curves and forced response curves with stability and
//!    bifurcation information from the reduced dynamics ([`reduced`]),
//! 6. validate against full-order implicit time integration ([`validate`]).

pub mod error;
pub mod linalg;
pub mod model;
pub mod spectral;
pub mod ssm;
pub mod reduced;
pub mod validate;
pub mod export;
pub mod pipeline;

pub use error::{Error, Result};
