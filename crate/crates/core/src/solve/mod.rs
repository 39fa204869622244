//! Linear solves and the monotone iteration between an ordered pair of sub-
//! and supersolutions.

mod monotone;
pub mod spd;

pub use monotone::{
    mms_solve, monotone_bracket, monotone_iterate, residual, Bracket, Branch, MmsResult, SolveResult,
    MAX_MONOTONE_ITERS, SHIFT_HEADROOM, SHIFT_SAMPLES,
};
pub use spd::{conjugate_gradient, spd_solve, CgStats, EnvelopeCholesky, Shifted, SpdOperator};
