//! Manifold constrained steepest descent (MCSD) on the Stiefel manifold.
//!
//! A step moves along the linear minimization oracle of the Riemannian
//! gradient for a chosen norm and projects back with the polar factor:
//! `x ← msign(x + α·lmo(∇_M f(x)))`. With the spectral norm this is SPEL,
//! `msign(x − α·msign(∇_M f(x)))`.
//!
//! The crate provides the dense linear algebra it needs ([`linalg`]), the
//! manifold ([`manifold`]), the oracles ([`lmo`]), a weighted-PCA benchmark
//! objective ([`objective`]), the optimizers ([`optim`]), executable bound
//! checks ([`verify`]) and the benchmark commands behind `mcsd-bench`
//! ([`bench`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
mod error;
pub mod linalg;
pub mod lmo;
pub mod manifold;
pub mod objective;
pub mod optim;
pub mod rng;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
