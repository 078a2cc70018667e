//! Eigenvalue branches, unitary and smooth triangularization, and the
//! numerical checks of the strong-triangularizability conditions.

pub mod branches;
pub mod conditions;
pub mod schur;
pub mod smooth;

pub use branches::{eigen_field, track_mode, BranchOrder, Crossing, EigenField, ModeBranches};
pub use conditions::{verify_strong_conditions, ConditionAccumulator, ConditionReport};
pub use schur::{schur_constant, simultaneous_schur};
pub use smooth::{smooth_step, smooth_triangularize, triangularize_mode, ModeForm, TriangularForm};
