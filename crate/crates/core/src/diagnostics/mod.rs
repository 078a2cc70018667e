//! Global-hypoellipticity verdicts: constant-coefficient tests, averaged
//! eigenvalue tests for `t`-dependent symbols, resonance sets, Diophantine
//! fits, perturbation expansions and the reduction of higher-order equations.

pub mod constant;
pub mod distance;
pub mod exact;
pub mod fit;
pub mod perturbation;
pub mod reduction;
pub mod variable;
pub mod verdict;

pub use constant::{diagnose_constant_full, diagnose_dt_plus_q};
pub use distance::{is_resonant, min_tau_distance, resonance_set, siegel_distance};
pub use fit::{diophantine_fit, sweep_distance, DiophantineFit, Sweep};
pub use perturbation::{perturbation_track, PerturbationFit, PerturbationPoint, PerturbationSettings};
pub use reduction::{companion_operator, reduce_higher_order};
pub use variable::{diagnose_variable, VariableSettings};
pub use verdict::{BranchEvidence, GHVerdict, Verdict};
