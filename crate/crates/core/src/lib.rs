//! Shape uncertainty quantification for curl-curl cavity eigenproblems.
//!
//! Random domain deformations `x + t V(x; z)` are pulled back to a fixed reference
//! domain, where they become random material coefficients. Eigenpairs are
//! differentiated with respect to the deformation amplitude and the first-order
//! derivatives are propagated to means and covariances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bspline;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod quadrature;
pub mod sensitivity;
pub mod uq;

pub use error::{Error, Result};
