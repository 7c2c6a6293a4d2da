//! Numerical toolkit for one-dimensional fractional Allen-Cahn energies.
//!
//! The kinetic part of every energy is the Gagliardo interaction
//! `u(A,B) = ∫_A ∫_B |u(x)-u(y)|^2 / |x-y|^(1+2s) dy dx`, assembled with exact
//! near-field formulas and Gauss quadrature in the far field.

pub mod energy;
pub mod expansion;
pub mod fracop;
pub mod funcrep;
pub mod potential;
pub mod quad;
pub mod solvers;
pub mod validation;

mod error;

pub use error::FracError;

pub type Result<T> = std::result::Result<T, FracError>;
