//! Spectral solvers for plane-like minimizers of `∫ ½|∇u|² + εV(x, u)` on
//! periodic cells, the averaged energy `A_ε(ω)` and its gradient jumps.

pub mod descent;
pub mod energy;
pub mod error;
pub mod grid;
pub mod heteroclinic;
pub mod lindstedt;
pub mod potential;
pub mod quadrature;

pub use error::{Error, JumpLeg, Result};
pub use grid::{Field, RotationVector, SpectralField, TorusSpec};
pub use potential::PotentialSpec;
