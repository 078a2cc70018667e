//! Verdicts for `t`-dependent symbols through their averaged eigenvalues.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::periodic_quadrature;
use crate::params::Tolerances;
use crate::symbol::lattice::norm;
use crate::symbol::{Lattice, MatrixSymbol, TimeGrid};
use crate::triangular::conditions::BranchConditions;
use crate::triangular::smooth::{analyze_mode, ExcludedMode, ModeOutcome};
use crate::triangular::{BranchOrder, ConditionAccumulator, ConditionReport};

use super::distance::{is_resonant, siegel_distance};
use super::exact::exact_integer_check;
use super::fit::{Sweep, WITNESS_CAP};
use super::verdict::{BranchEvidence, GHVerdict, Verdict};

/// Settings of the variable-coefficient pipeline.
#[derive(Debug, Clone, Copy)]
pub struct VariableSettings {
    pub grid: TimeGrid,
    pub order: BranchOrder,
    pub alpha_max: u32,
}

impl Default for VariableSettings {
    fn default() -> Self {
        VariableSettings { grid: TimeGrid::default(), order: BranchOrder::default(), alpha_max: 4 }
    }
}

struct State {
    acc: ConditionAccumulator,
    sweeps: Vec<Sweep>,
    excluded: Vec<ExcludedMode>,
    excluded_count: u64,
    excluded_outside: u64,
    undefined: Vec<Vec<i64>>,
}

impl State {
    fn merge(&mut self, other: State) {
        self.acc.merge(&other.acc);
        for (a, b) in self.sweeps.iter_mut().zip(other.sweeps) {
            a.merge(b);
        }
        self.excluded.extend(other.excluded);
        self.excluded.truncate(WITNESS_CAP);
        self.excluded_count += other.excluded_count;
        self.excluded_outside += other.excluded_outside;
        self.undefined.extend(other.undefined);
    }
}

/// Which hypothesis on `Im lambda_k(t, xi)` lets the averaged verdict of
/// branch `k` transfer to the full system.
fn imaginary_hypothesis(b: &BranchConditions) -> Option<&'static str> {
    if b.imag_lower_bounded {
        Some("imaginary-part lower bound")
    } else if b.imag_upper_bounded {
        Some("imaginary-part upper bound (mirrored)")
    } else if b.sign_changes == 0 {
        Some("Im lambda keeps its sign in t")
    } else {
        None
    }
}

/// Classify `D_t + Q(t, D_x)`. Along each smooth eigenvalue branch the
/// average `lambda_0(xi)` is computed, resonances `lambda_0(xi) in Z` are
/// collected and `siegel_distance(lambda_0(xi))` is fitted. The verdict
/// transfers to the system only when the triangularization is verified
/// (polynomial frame, rapidly decaying twist) and a hypothesis on
/// `Im lambda` holds; otherwise it is downgraded to `Inconclusive` and the
/// failing hypothesis is named.
pub fn diagnose_variable(
    q: &MatrixSymbol,
    lattice: &Lattice,
    settings: &VariableSettings,
    tol: &Tolerances,
) -> Result<GHVerdict> {
    if lattice.dim != q.n {
        return Err(Error::DimensionMismatch(format!(
            "lattice has dimension {}, symbol has {} frequency variables",
            lattice.dim, q.n
        )));
    }
    let ts = q.time_samples(settings.grid.len);
    let m = q.m;
    let fresh = || State {
        acc: ConditionAccumulator::new(*lattice, m, settings.alpha_max, tol),
        sweeps: (0..m).map(|_| Sweep::new(*lattice, tol.r_exc)).collect(),
        excluded: Vec::new(),
        excluded_count: 0,
        excluded_outside: 0,
        undefined: Vec::new(),
    };
    let mut state = lattice.try_par_fold(
        fresh,
        |s, xi| {
            match analyze_mode(q, &ts, xi, settings.order, tol)? {
                ModeOutcome::Undefined => s.undefined.push(xi.to_vec()),
                ModeOutcome::Tracked { form: Err(reason), .. } => {
                    s.excluded_count += 1;
                    if norm(xi) > tol.r_exc {
                        s.excluded_outside += 1;
                    }
                    if s.excluded.len() < WITNESS_CAP {
                        s.excluded.push(ExcludedMode { xi: xi.to_vec(), reason });
                    }
                }
                ModeOutcome::Tracked { branches, form: Ok(form) } => {
                    s.acc.push(&branches, &form)?;
                    for (k, lam) in branches.lambda.iter().enumerate() {
                        let l0: Complex64 = periodic_quadrature(lam);
                        let witness = is_resonant(l0, tol.res_tol) && exact_integer_check(q, xi, l0).unwrap_or(true);
                        s.sweeps[k].push(xi, siegel_distance(l0), witness);
                    }
                }
            }
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    state.undefined.sort();
    state.excluded.sort_by(|a, b| a.xi.cmp(&b.xi));

    let branches: Vec<BranchEvidence> = state
        .sweeps
        .iter()
        .enumerate()
        .map(|(k, sw)| BranchEvidence::from_fit(k, "siegel_distance(lambda_0k(xi))", sw.fit(tol)))
        .collect();
    let conditions = state.acc.finish(tol);
    let mut v = combine(branches, conditions, state.excluded_outside, tol);
    v.excluded = state.excluded;
    v.excluded_count = state.excluded_count;
    v.undefined = state.undefined;
    Ok(v)
}

fn combine(
    mut branches: Vec<BranchEvidence>,
    conditions: Result<ConditionReport>,
    excluded_outside: u64,
    tol: &Tolerances,
) -> GHVerdict {
    let resonant = |b: &[BranchEvidence]| b.iter().any(|e| e.verdict == Verdict::NonGhResonant);
    let cond = match conditions {
        Ok(c) => c,
        Err(e) => {
            let mut v = GHVerdict::new("strong triangularization unverified", branches);
            v.verdict = Verdict::Inconclusive;
            v.notes.push(format!("condition fits unavailable: {e}"));
            return v;
        }
    };
    if !cond.strongly_triangularizable() {
        let mut v = GHVerdict::new("strong triangularization unverified", branches);
        v.verdict = Verdict::Inconclusive;
        if !cond.s_polynomial {
            v.notes.push("the frame S or its inverse is not polynomially bounded".into());
        }
        if !cond.b_rapid_decay {
            v.notes.push("the twist S^-1 D_t S does not decay rapidly".into());
        }
        v.conditions = Some(cond);
        return v;
    }
    if resonant(&branches) {
        let mut v = GHVerdict::new("averaged eigenvalue is an integer on an unbounded set of frequencies", branches);
        v.verdict = Verdict::NonGhResonant;
        v.conditions = Some(cond);
        return v;
    }
    let mut notes = Vec::new();
    for b in branches.iter_mut() {
        let hyp = cond.branches.get(b.branch).and_then(imaginary_hypothesis);
        b.hypothesis = hyp.map(str::to_string);
        let lower_or_mirror = cond
            .branches
            .get(b.branch)
            .map(|c| c.imag_lower_bounded || c.imag_upper_bounded)
            .unwrap_or(false);
        match b.verdict {
            Verdict::GhConsistent if hyp.is_none() => {
                b.verdict = Verdict::Inconclusive;
                notes.push(format!(
                    "branch {}: average is Diophantine, but Im lambda is unbounded on both sides and changes sign",
                    b.branch
                ));
            }
            Verdict::NonGhSuperpolynomial if !lower_or_mirror => {
                b.verdict = Verdict::Inconclusive;
                notes.push(format!(
                    "branch {}: average collapses superpolynomially, but neither imaginary-part bound holds",
                    b.branch
                ));
            }
            _ => {}
        }
    }
    let mut v = GHVerdict::new("Diophantine behaviour of the averaged eigenvalues", branches);
    if excluded_outside > 0 && v.verdict == Verdict::GhConsistent {
        v.verdict = Verdict::Inconclusive;
        notes.push(format!(
            "{excluded_outside} frequencies beyond radius {} could not be triangularized",
            tol.r_exc
        ));
    }
    v.notes = notes;
    v.conditions = Some(cond);
    v
}
