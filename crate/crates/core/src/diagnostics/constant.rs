//! Verdicts for constant-coefficient symbols.

use crate::error::{Error, Result};
use crate::linalg::eigenvalues;
use crate::params::Tolerances;
use crate::symbol::{Lattice, MatrixSymbol};

use super::distance::min_tau_distance;
use super::exact::{exact_integer_check, exact_zero_count};
use super::fit::Sweep;
use super::verdict::{BranchEvidence, GHVerdict};

fn require_constant(q: &MatrixSymbol, lattice: &Lattice) -> Result<()> {
    if !q.is_time_independent() {
        return Err(Error::InvalidInput("symbol must not depend on t".into()));
    }
    if lattice.dim != q.n {
        return Err(Error::DimensionMismatch(format!(
            "lattice has dimension {}, symbol has {} frequency variables",
            lattice.dim, q.n
        )));
    }
    Ok(())
}

/// Per-branch sweeps plus an optional extra sweep, collected in parallel.
struct State {
    branches: Vec<Sweep>,
    extra: Sweep,
    undefined: Vec<Vec<i64>>,
}

impl State {
    fn new(lattice: Lattice, m: usize, tol: &Tolerances) -> Self {
        State {
            branches: (0..m).map(|_| Sweep::new(lattice, tol.r_exc)).collect(),
            extra: Sweep::new(lattice, tol.r_exc),
            undefined: Vec::new(),
        }
    }

    fn merge(&mut self, other: State) {
        for (a, b) in self.branches.iter_mut().zip(other.branches) {
            a.merge(b);
        }
        self.extra.merge(other.extra);
        self.undefined.extend(other.undefined);
    }
}

fn sweep_constant<F>(q: &MatrixSymbol, lattice: &Lattice, tol: &Tolerances, visit: F) -> Result<State>
where
    F: Fn(&mut State, &[i64], &crate::linalg::CMat) -> Result<()> + Sync + Send,
{
    let mut state = lattice.try_par_fold(
        || State::new(*lattice, q.m, tol),
        |s, xi| match q.eval_constant(xi) {
            Ok(a) => visit(s, xi, &a),
            Err(Error::EvalDomain { .. }) => {
                s.undefined.push(xi.to_vec());
                Ok(())
            }
            Err(e) => Err(e),
        },
        |a, b| a.merge(b),
    )?;
    state.undefined.sort();
    Ok(state)
}

/// Full-lattice test for a constant operator `L(D)` on the torus: the
/// eigenvalues must satisfy `|lambda_j(eta)| >= C |eta|^{-M}`. Each branch
/// (in modulus order) is fitted; `|det L(eta)|`, whose polynomial lower
/// bound is sufficient on its own, is reported as corroboration.
pub fn diagnose_constant_full(l: &MatrixSymbol, lattice: &Lattice, tol: &Tolerances) -> Result<GHVerdict> {
    require_constant(l, lattice)?;
    let state = sweep_constant(l, lattice, tol, |s, eta, a| {
        let lambda = eigenvalues(a)?;
        let exact_zeros = exact_zero_count(l, eta);
        for (j, z) in lambda.iter().enumerate() {
            let witness = match exact_zeros {
                Some(count) => j < count,
                None => z.norm() == 0.0,
            };
            s.branches[j].push(eta, z.norm(), witness);
        }
        let det: f64 = lambda.iter().map(|z| z.norm()).product();
        let singular = match exact_zeros {
            Some(count) => count > 0,
            None => det == 0.0,
        };
        s.extra.push(eta, det, singular);
        Ok(())
    })?;
    let branches = state
        .branches
        .iter()
        .enumerate()
        .map(|(j, sw)| BranchEvidence::from_fit(j, "|lambda_j(eta)|", sw.fit(tol)))
        .collect();
    let mut v = GHVerdict::new("eigenvalue lower bound |lambda_j(eta)| >= C |eta|^-M on the full lattice", branches);
    v.corroboration = state.extra.fit(tol).ok();
    v.undefined = state.undefined;
    v.notes.push("the determinant fit is a sufficient check only".into());
    Ok(v)
}

/// Test for `D_t + Q(D_x)` with `Q` constant in `t`: each eigenvalue
/// `kappa_j(xi)` of `Q(xi)` must satisfy `|tau + kappa_j(xi)| >= C |xi|^{-M}`
/// over integer `tau`. The verdict is the worst branch.
pub fn diagnose_dt_plus_q(q: &MatrixSymbol, lattice: &Lattice, tol: &Tolerances) -> Result<GHVerdict> {
    require_constant(q, lattice)?;
    let state = sweep_constant(q, lattice, tol, |s, xi, a| {
        for (j, kappa) in eigenvalues(a)?.into_iter().enumerate() {
            let d = min_tau_distance(kappa);
            let witness = d <= tol.res_tol && exact_integer_check(q, xi, kappa).unwrap_or(true);
            s.branches[j].push(xi, d, witness);
        }
        Ok(())
    })?;
    let branches = state
        .branches
        .iter()
        .enumerate()
        .map(|(j, sw)| BranchEvidence::from_fit(j, "min_tau |tau + kappa_j(xi)|", sw.fit(tol)))
        .collect();
    let mut v = GHVerdict::new("eigenvalue distance |tau + kappa_j(xi)| >= C (|tau| + |xi|)^-M", branches);
    v.undefined = state.undefined;
    Ok(v)
}
