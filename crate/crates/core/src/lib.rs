//! Numerical lab for global hypoellipticity of `P = D_t + Q(t, D_x)` on the
//! torus `T^1_t x T^n_x`, with `D = -i d`.
//!
//! The pipeline is: sample the matrix symbol on a frequency lattice, track
//! its eigenvalue branches in `t`, build a smooth triangularization
//! `S^{-1} Q S = Lambda + N`, test the growth conditions that make the
//! triangular system equivalent to the original one, and then decide global
//! hypoellipticity from Diophantine properties of the averaged eigenvalues.

pub mod diagnostics;
pub mod error;
pub mod fourier;
pub mod linalg;
pub mod params;
pub mod report;
pub mod solver;
pub mod symbol;
pub mod triangular;

pub use error::{Error, Result};
pub use params::Tolerances;
