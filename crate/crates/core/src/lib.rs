//! Numerical laboratory for mountain-pass ground states of radial semilinear
//! elliptic problems: `-Δu + λu = V g(u)` on `R^N` and the forced problem
//! `-Δu = (u⁺)^p + f` on a ball.

// Guards are written `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod continuation;
pub mod error;
pub mod functional;
pub mod nonhomogeneous;
pub mod nonlinearity;
pub mod radial;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
