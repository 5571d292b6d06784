//! Shallow-network function classes with Deep Ritz and PINN training, plus a
//! verification harness for the identities and bounds that connect them.
//!
//! Everything lives on the unit hypercube `(0,1)^d`:
//!
//! - [`domain`]: samplers and tensor Gauss–Legendre quadrature (the
//!   "population" oracle).
//! - [`shallow_nets`]: the constrained two-layer classes `F_{m,1}(B)` and
//!   `F_{m,2}(B)` with value/gradient/Hessian evaluation and backprop.
//! - [`constructor`]: explicit ReLU interpolants lifted along ridges,
//!   and ReLU² Taylor-remainder builders.
//! - [`problems`]: manufactured problems with closed-form solutions.
//! - [`losses`]: empirical and population Deep Ritz / PINN losses and their
//!   parameter gradients.
//! - [`trainer`]: projected first-order ERM.
//! - [`analysis`]: error metrics and the statistical estimators built on
//!   them.
//! - [`verify`]: the invariant suites bundled for the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod constructor;
pub mod domain;
mod error;
pub mod eval;
pub mod losses;
pub mod problems;
pub mod rng;
pub mod shallow_nets;
pub mod stats;
pub mod sum;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use eval::Evaluable;
