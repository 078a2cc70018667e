//! Numerical tolerances shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All tunable thresholds. Every field can be overridden by name from the
/// command line (`--tol name=value`) or the `tolerances` block of a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Eigen-residual tolerance, relative to the Frobenius norm of the matrix.
    pub eig_tol: f64,
    /// Strictly-lower residual allowed after triangularization (relative).
    pub resid_tol: f64,
    /// Relative commutator norm below which two matrices count as commuting.
    pub comm_tol: f64,
    /// Distance to the integers below which an averaged eigenvalue is resonant.
    pub res_tol: f64,
    /// Smallest admissible pivot ratio |h_j| / |h|.
    pub pivot_tol: f64,
    /// Relative residual accepted from the periodic mode solver.
    pub ode_tol: f64,
    /// Convergence threshold of the zero-order correction loop.
    pub fixed_point_tol: f64,
    pub max_iterations: usize,
    /// Largest exponent tolerated inside the forward/backward integral formulas.
    pub exp_cap: f64,
    /// Fitted Diophantine slopes flatter than `-m_cap` count as polynomial.
    pub m_cap: f64,
    /// Probe exponent for rapid decay / superpolynomial growth.
    pub n_probe: f64,
    /// Radius of the exceptional ball excluded from asymptotic claims.
    pub r_exc: f64,
    /// RMS log2 residual above which a power-law fit is called irregular.
    pub fit_resid_tol: f64,
    /// Branch-matching gap ratio below which a crossing is flagged.
    pub gap_ratio: f64,
    /// Largest perturbation-fit residual, relative to `1 + max |lambda|`.
    pub perturb_fit_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eig_tol: 1e-10,
            resid_tol: 1e-10,
            comm_tol: 1e-10,
            res_tol: 1e-9,
            pivot_tol: 1e-8,
            ode_tol: 1e-8,
            fixed_point_tol: 1e-10,
            max_iterations: 50,
            exp_cap: 30.0,
            m_cap: 12.0,
            n_probe: 8.0,
            r_exc: 8.0,
            fit_resid_tol: 3.0,
            gap_ratio: 2.0,
            perturb_fit_tol: 1e-6,
        }
    }
}

impl Tolerances {
    /// Override one field by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("tolerance {name} must be finite")));
        }
        match name {
            "eig_tol" => self.eig_tol = value,
            "resid_tol" => self.resid_tol = value,
            "comm_tol" => self.comm_tol = value,
            "res_tol" => self.res_tol = value,
            "pivot_tol" => self.pivot_tol = value,
            "ode_tol" => self.ode_tol = value,
            "fixed_point_tol" => self.fixed_point_tol = value,
            "max_iterations" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidInput("max_iterations must be a positive integer".into()));
                }
                self.max_iterations = value as usize
            }
            "exp_cap" => self.exp_cap = value,
            "m_cap" => self.m_cap = value,
            "n_probe" => self.n_probe = value,
            "r_exc" => self.r_exc = value,
            "fit_resid_tol" => self.fit_resid_tol = value,
            "gap_ratio" => self.gap_ratio = value,
            "perturb_fit_tol" => self.perturb_fit_tol = value,
            _ => return Err(Error::InvalidInput(format!("unknown tolerance `{name}`"))),
        }
        Ok(())
    }

    /// Parse `name=value` as given on the command line.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (name, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("expected NAME=VALUE, got `{assignment}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad tolerance value in `{assignment}`")))?;
        self.set(name.trim(), value)
    }
}
