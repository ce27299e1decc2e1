//! Numerical toolkit for the one-dimensional thin-film equation
//!
//! ```text
//! u_t = −(u u_xxx)_x − (u (u^m)_x)_x
//! ```
//!
//! with fourth-order repulsion and power-law aggregation. The crate builds
//! the compactly supported extremal steady state, evaluates the sharp
//! interpolation constant and the threshold quantities derived from it,
//! integrates a regularized version of the equation with a conservative
//! implicit scheme, and classifies initial data as blowing up or spreading.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the quoted
//! tolerances assume.

pub mod banded;
pub mod classify;
pub mod error;
pub mod evolve;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod num;
pub mod quadrature;
pub mod sharp;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{Boundary, Field, Grid, ModelParams};
pub use num::Scalar;

pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type SteadyProfile64 = steady::SteadyProfile<f64>;
pub type SharpConstants64 = sharp::SharpConstants<f64>;
pub type SolverConfig64 = evolve::SolverConfig<f64>;
pub type RunRecord64 = evolve::RunRecord<f64>;
pub type ThresholdVerdict64 = classify::ThresholdVerdict<f64>;
