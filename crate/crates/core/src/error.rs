use thiserror::Error;

use crate::geometry::Vec2;

/// Errors raised by the geometric and numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate curve: |x'(θ)| = {speed:e} at θ = {theta}")]
    DegenerateCurve { theta: f64, speed: f64 },

    #[error("curve is not counterclockwise (signed area {area})")]
    WrongOrientation { area: f64 },

    #[error("curve self-intersects")]
    SelfIntersecting,

    #[error("inclusions overlap")]
    Overlapping,

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("non-positive curvature {curvature} at the closest point of inclusion {inclusion}")]
    NonConvexAtContact { inclusion: usize, curvature: f64 },

    #[error("point {0:?} is a singularity of the evaluated function")]
    AtSingularity(Vec2),

    #[error("evaluation point {point:?} is within {margin:e} of a boundary node")]
    NearBoundary { point: Vec2, margin: f64 },

    #[error("numerically singular matrix (pivot ratio {pivot_ratio:e})")]
    SingularMatrix { pivot_ratio: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rho = {rho} is too large for the dumbbell construction: {reason}")]
    RhoTooLarge { rho: f64, reason: String },

    #[error("operation requires a smooth closed boundary")]
    NotSmooth,

    #[error("rank-deficient least-squares design")]
    RankDeficient,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
