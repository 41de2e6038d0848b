use thiserror::Error;

use crate::descent::NonConvergence;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which of the three rotation vectors of a jump estimate a failure belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpLeg {
    Center,
    Plus,
    Minus,
}

impl std::fmt::Display for JumpLeg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            JumpLeg::Center => "center",
            JumpLeg::Plus => "plus",
            JumpLeg::Minus => "minus",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid torus: {0}")]
    InvalidTorus(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incommensurate rotation vector: {0}")]
    Incommensurate(String),

    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("shift {offset} along axis {axis} is not a whole number of grid nodes")]
    Misaligned { axis: usize, offset: f64 },

    #[error("incompatible right-hand side: mean {mean:e} exceeds tolerance {tol:e}")]
    Compatibility { mean: f64, tol: f64 },

    #[error("descent did not converge after {} iterations (residual {:e})", .0.last.iterations, .0.last.residual_linf)]
    NonConvergence(Box<NonConvergence>),

    #[error("{leg} solve of the jump estimate failed: {source}")]
    JumpSolve {
        leg: JumpLeg,
        #[source]
        source: Box<Error>,
    },

    #[error("resonance function of order {order} has no sign change on the grid (min {min:e}, max {max:e})")]
    NoRoot { order: usize, min: f64, max: f64 },

    #[error("twist condition fails at alpha = {alpha}: mean V_yy = {twist:e}")]
    DegenerateTwist { alpha: f64, twist: f64 },

    #[error("linear solve stalled after {iterations} iterations (relative residual {relative_residual:e}, smallest Ritz value {smallest_ritz:e})")]
    LinearSolveStall {
        iterations: usize,
        relative_residual: f64,
        smallest_ritz: f64,
    },

    #[error("strip too short: integrand {value:e} at |x| = {half_length}")]
    TailError { half_length: f64, value: f64 },

    #[error("nonpositive jump {jump:e} at epsilon = {epsilon}")]
    NonPositiveJump { epsilon: f64, jump: f64 },

    #[error("power-law fit needs at least 3 records, got {0}")]
    TooFewPoints(usize),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}
