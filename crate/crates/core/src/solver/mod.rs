//! Periodic mode solvers, triangular back-substitution and non-smooth
//! counterexample solutions.

pub mod nonsmooth;
pub mod periodic;
pub mod quadrature;
pub mod system;

pub use nonsmooth::{branch_table, build_nonsmooth_solution, embed_leading, NonSmoothMode, NonSmoothSolution};
pub use periodic::{
    check_resonance, exponent_bounds, mode_residual, solve_periodic_mode, solve_periodic_mode_with, ExponentBounds,
    Formula, PeriodicSolution,
};
pub use system::{
    back_substitute, back_substitute_mode, solve_full, system_residual, ModeRecord, ModeSolution, SkippedSolve,
    SolveSummary, TriangularMode,
};
