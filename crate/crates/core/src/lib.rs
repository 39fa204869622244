//! Positive supersolutions for logistic boundary value problems whose
//! absorption weight vanishes on the boundary.
//!
//! The crate builds a strictly positive supersolution `K·Φ` for
//!
//! ```text
//! -Δu = λ m(x) u - a(x) f(x, u)  in Ω,    u = g  on ∂Ω,    a = 0 on ∂Ω,
//! ```
//!
//! certifies it node by node, and computes the positive solution by monotone
//! iteration between the zero subsolution and `K·Φ`.
//!
//! `Φ` is the principal Dirichlet eigenfunction of a collar `O_ε` around the
//! boundary, blended with a quintic cutoff into a positive constant in the
//! core. The collar width is chosen so that the principal eigenvalue of the
//! collar exceeds `max λm`; a Faber–Krahn-type lower bound gives an a-priori
//! alternative to computing that eigenvalue.
//!
//! Modules, bottom up:
//!
//! - [`domain`]: shapes, exact signed distances, grids and masks
//! - [`expr`]: the coefficient expression language
//! - [`problem`]: problem data, fields and hypothesis checks
//! - [`eigen`]: discrete Laplacian, principal eigenpairs, Faber–Krahn bound
//! - [`construct`]: collar selection, blending and the choice of `K`
//! - [`verify`]: the independent pointwise checker
//! - [`solve`]: SPD solves, monotone iteration and manufactured solutions

pub mod construct;
pub mod domain;
pub mod eigen;
pub mod error;
pub mod expr;
pub mod problem;
pub mod solve;
pub mod verify;

pub use error::{Error, Result};
