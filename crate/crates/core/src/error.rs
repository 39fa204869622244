use thiserror::Error;

use crate::domain::Point;
use crate::expr::{EvalError, ParseError};
use crate::problem::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid grid spacing {0}")]
    InvalidSpacing(f64),

    #[error("grid spacing h = {h} leaves no interior node")]
    GridTooCoarse { h: f64 },

    #[error("region has no nodes")]
    EmptyRegion,

    #[error("fields or masks live on different grids")]
    GridMismatch,

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{source} at ({}, {})", at[0], at[1])]
    EvalAt {
        #[source]
        source: EvalError,
        at: Point,
    },

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("expression `{expr}` may not depend on `{var}`")]
    ForbiddenVariable { expr: String, var: char },

    #[error("problem violates its hypotheses: {}", .0.failures().join("; "))]
    ValidationFailed(Box<ValidationReport>),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { pivot: f64, row: usize },

    #[error("iteration did not converge within {max_iters} iterations")]
    NoConvergence { max_iters: usize },

    #[error("no admissible collar width: eps = {eps} fell below 4h = {min} (refine the grid)")]
    EpsilonNotFound { eps: f64, min: f64 },

    #[error("blend band [eps/2, 3eps/4] contains no grid nodes (eps = {eps})")]
    DegenerateBand { eps: f64 },

    #[error("K search diverged after {doublings} doublings; f does not look superlinear")]
    KSearchDiverged { doublings: usize },

    #[error("absorption weight is not bounded below by gamma = {gamma} (min a = {min_a})")]
    NotNondegenerate { gamma: f64, min_a: f64 },

    #[error("absorption weight a = {a} is not positive at ({}, {}) away from the boundary", at[0], at[1])]
    DegenerateInterior { a: f64, at: Point },

    #[error("monotone ordering violated by {excess} at node {node} (shift {shift})")]
    MonotonicityBroken { excess: f64, node: usize, shift: f64 },

    #[error("starting pair is not an ordered sub/supersolution pair: {0}")]
    InvalidPair(String),
}
