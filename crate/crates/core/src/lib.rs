//! Generalised Gauss (open) and Gauss–Lobatto (closed) quadrature for
//! arbitrary finite-dimensional function spaces, and the minimal diagonal-norm
//! function-space summation-by-parts (FSBP) operators assembled from them.
//!
//! The pipeline is
//!
//! 1. describe a space `F` ([`funcspace::make_family`]),
//! 2. derive `G = (FF)'` ([`funcspace::product_derivative_space`]) and pad it
//!    to even dimension ([`funcspace::augment_to_even`]),
//! 3. compute the Gauss or Gauss–Lobatto rule for `G`
//!    ([`gauss::continuation_solve`]),
//! 4. assemble `D = P^{-1} Q` ([`fsbp::build_operator`]).
//!
//! [`pipeline`] chains these steps; [`ibvp`] uses the resulting operators in
//! multi-element SAT/LDG solvers.

// `!(x > 0.0)` is how NaN gets rejected together with the failing values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fixtures;
pub mod fsbp;
pub mod funcspace;
pub mod gauss;
pub mod ibvp;
pub mod integrate;
pub mod legendre;
pub mod pipeline;

pub use error::{Error, Result};
pub use fsbp::{build_operator, verify_sbp, FsbpOperator, SbpVerdict};
pub use funcspace::{BasisFunction, FamilySpec, FunctionSpace, Jet, SpaceSpec};
pub use gauss::{ExactnessCertificate, QuadratureRule};
