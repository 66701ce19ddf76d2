//! Plane/curved-surface interaction functionals: proximity force
//! approximation, derivative expansion to second (and partial fourth) order,
//! Derjaguin approximation, Blocki's Jacobian form and surface element
//! integration, together with the numerical machinery needed to extract
//! next-to-leading-order coefficients from them.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod engine;
pub mod error;
pub mod kernels;
pub mod profiles;
pub mod quadrature;

pub use error::{Error, Result};
pub use kernels::{Boundary, InteractionKernel, PatchCorrelation};
pub use profiles::{LocalGeometry, Planform, SurfaceProfile};
pub use quadrature::{Domain, Estimate, QuadError, QuadratureSpec};
