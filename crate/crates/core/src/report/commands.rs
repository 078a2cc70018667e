//! The five subcommands: each builds a report and its artifacts.

use std::path::Path;

use crate::diagnostics::{
    diagnose_constant_full, diagnose_dt_plus_q, diagnose_variable, perturbation_track, GHVerdict, VariableSettings,
};
use crate::error::{Error, Result};
use crate::fourier::{classify_decay, ModeTable};
use crate::symbol::Lattice;
use crate::triangular::{eigen_field, smooth_triangularize, verify_strong_conditions, TriangularForm};

use super::config::{ProblemKind, RunConfig};
use super::output::{
    Artifact, Claim, DecayOutcome, ErrorDetail, RunReport, Timings, TriangularSummary, LIST_CAP,
};
use super::tables::{annulus_minima_csv, perturbation_csv, triangular_csv};

/// Everything a command produced. `failure` is set when the run completed
/// but a mathematical precondition failed; the report is still written.
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: Vec<Artifact>,
    pub timings: Timings,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.error.as_ref().map_or(0, |e| e.exit_code)
    }
}

const TRIANGULAR_TOLS: &[&str] = &["eig_tol", "resid_tol", "pivot_tol", "gap_ratio"];
const CONDITION_TOLS: &[&str] = &["fit_resid_tol", "n_probe", "resid_tol"];
const VERDICT_TOLS: &[&str] = &["res_tol", "m_cap", "fit_resid_tol", "r_exc"];
const PERTURB_TOLS: &[&str] = &["perturb_fit_tol", "comm_tol", "gap_ratio", "res_tol", "m_cap"];
const SOLVE_TOLS: &[&str] = &["ode_tol", "res_tol", "exp_cap", "fixed_point_tol", "max_iterations"];
const DECAY_TOLS: &[&str] = &["fit_resid_tol", "n_probe"];

fn summarize(form: &TriangularForm, tol_resid: f64) -> TriangularSummary {
    let max_twist = form
        .modes
        .iter()
        .flat_map(|f| f.b.iter())
        .flat_map(|b| b.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    TriangularSummary {
        modes: form.modes.len(),
        excluded_count: form.excluded.len(),
        excluded: form.excluded.iter().take(LIST_CAP).cloned().collect(),
        undefined: form.undefined.iter().map(|s| s.xi.clone()).collect(),
        max_residual: form.max_residual,
        max_inverse_error: form.max_inverse_error,
        max_twist,
        twist_vanishes: max_twist <= tol_resid,
        max_nilpotency_defect: form.modes.iter().map(|f| f.nilpotency_defect()).fold(0.0, f64::max),
    }
}

/// Sample, track and triangularize the symbol over the lattice, then test
/// the growth conditions. Crossings or missing pivots make the run fail
/// with exit code 2 after the report is written.
pub fn cmd_triangularize(cfg: &RunConfig) -> Result<RunOutput> {
    let mut timings = Timings::new();
    let tol = &cfg.tolerances;
    let lattice = cfg.lattice()?;
    let grid = cfg.grid()?;
    let field = timings.time("eigen_field", || eigen_field(&cfg.symbol, &lattice, &grid, cfg.branch_order, tol))?;
    let form = timings.time("smooth_triangularize", || smooth_triangularize(&field, &cfg.symbol, tol))?;
    let conditions = timings.time("verify_strong_conditions", || {
        verify_strong_conditions(&form, &field, cfg.alpha_max, tol)
    });
    let mut report = RunReport::new("triangularize", cfg.clone());
    report.triangular = Some(Claim::new("smooth_triangularize", tol, TRIANGULAR_TOLS, summarize(&form, tol.resid_tol)));
    let mut artifacts = vec![Artifact { name: "triangular.csv".into(), bytes: triangular_csv(&form, cfg.dump_radius)? }];
    match conditions {
        Ok(c) => {
            artifacts.push(Artifact::json("conditions.json", &c)?);
            report.conditions = Some(Claim::new("verify_strong_conditions", tol, CONDITION_TOLS, c));
        }
        Err(e) => report.warnings.push(format!("growth conditions not evaluated: {e}")),
    }
    if let Err(e) = form.require_complete() {
        let kind = e.kind();
        let witnesses: Vec<Vec<i64>> = form
            .excluded
            .iter()
            .filter(|x| x.reason.to_error(&x.xi).kind() == kind)
            .take(LIST_CAP)
            .map(|x| x.xi.clone())
            .collect();
        report.error = Some(ErrorDetail::from_error(&e, witnesses));
    }
    Ok(RunOutput { report, artifacts, timings })
}

/// Run the verdict pipeline that matches the problem kind.
pub fn run_diagnosis(cfg: &RunConfig, lattice: &Lattice) -> Result<GHVerdict> {
    let tol = &cfg.tolerances;
    match cfg.kind {
        ProblemKind::ConstantFull => diagnose_constant_full(&cfg.symbol, lattice, tol),
        ProblemKind::DtPlusQ => diagnose_dt_plus_q(&cfg.symbol, lattice, tol),
        ProblemKind::Variable | ProblemKind::Auto => {
            let settings = VariableSettings { grid: cfg.grid()?, order: cfg.branch_order, alpha_max: cfg.alpha_max };
            diagnose_variable(&cfg.symbol, lattice, &settings, tol)
        }
    }
}

/// Classify global hypoellipticity and write the per-annulus minima.
pub fn cmd_diagnose(cfg: &RunConfig) -> Result<RunOutput> {
    let mut timings = Timings::new();
    let lattice = cfg.lattice()?;
    let verdict = timings.time("diagnose", || run_diagnosis(cfg, &lattice))?;
    let mut report = RunReport::new("diagnose", cfg.clone());
    let artifacts = vec![Artifact { name: "annulus_minima.csv".into(), bytes: annulus_minima_csv(&verdict)? }];
    let operation = match cfg.kind {
        ProblemKind::ConstantFull => "diagnose_constant_full",
        ProblemKind::DtPlusQ => "diagnose_dt_plus_q",
        _ => "diagnose_variable",
    };
    report.verdict = Some(Claim::new(operation, &cfg.tolerances, VERDICT_TOLS, verdict));
    Ok(RunOutput { report, artifacts, timings })
}

/// Solve `D_t u + Q u = f` for the right-hand side table at `rhs`.
pub fn cmd_solve(cfg: &RunConfig, rhs: &Path) -> Result<RunOutput> {
    if cfg.kind == ProblemKind::ConstantFull {
        return Err(Error::InvalidInput("solve needs an operator of the form D_t + Q".into()));
    }
    let mut timings = Timings::new();
    let tol = &cfg.tolerances;
    let f = ModeTable::read_csv(std::fs::File::open(rhs)?)?;
    if f.t_len != cfg.tgrid {
        return Err(Error::GridMismatch(format!("right-hand side has {} time samples, config has tgrid = {}", f.t_len, cfg.tgrid)));
    }
    let sol = timings.time("solve_full", || crate::solver::solve_full(&cfg.symbol, &f, cfg.branch_order, tol))?;
    let mut report = RunReport::new("solve", cfg.clone());
    let mut bytes = Vec::new();
    sol.v.write_csv(&mut bytes)?;
    let artifacts = vec![Artifact { name: "solution.csv".into(), bytes }];
    if !sol.skipped.is_empty() {
        report.warnings.push(format!("{} frequencies skipped (see solve.result.skipped)", sol.skipped.len()));
    }
    let unresolved = sol.skipped.iter().filter(|s| s.reason == "ResidualTooLarge").count();
    if unresolved > 0 {
        report.warnings.push(format!(
            "{unresolved} frequencies exceed ode_tol at tgrid = {}; a finer time grid usually resolves them",
            cfg.tgrid
        ));
    }
    let decay = timings.time("classify_decay", || {
        let lattice = Lattice::enclosing(sol.v.dim, sol.v.data.keys().map(|k| k.as_slice()))?;
        classify_decay(&sol.v, cfg.alpha_max, &lattice, tol)
    });
    let decay = match decay {
        Ok(r) => DecayOutcome::Report(r),
        Err(e) => DecayOutcome::Unavailable { unavailable: e.to_string() },
    };
    report.solve = Some(Claim::new("solve_full", tol, SOLVE_TOLS, sol.summary()));
    report.decay = Some(Claim::new("classify_decay", tol, DECAY_TOLS, decay));
    Ok(RunOutput { report, artifacts, timings })
}

/// Track the eigenvalues of `L + eps Q` over the epsilon grid and fit
/// their Taylor coefficients.
pub fn cmd_perturb(cfg: &RunConfig) -> Result<RunOutput> {
    let q = cfg
        .perturbation
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("perturb needs a `perturbation` block in the problem file".into()))?;
    let mut timings = Timings::new();
    let tol = &cfg.tolerances;
    let lattice = cfg.lattice()?;
    let (fit, verdict) = timings.time("perturbation_track", || {
        perturbation_track(&cfg.symbol, q, &cfg.perturbation_settings, &lattice, tol)
    })?;
    let mut report = RunReport::new("perturb", cfg.clone());
    let artifacts = vec![
        Artifact::json("perturbation.json", &fit)?,
        Artifact { name: "perturbation.csv".into(), bytes: perturbation_csv(&fit)? },
    ];
    report.perturbation = Some(Claim::new("perturbation_track", tol, PERTURB_TOLS, fit));
    report.verdict = Some(Claim::new("perturbation_track", tol, VERDICT_TOLS, verdict));
    Ok(RunOutput { report, artifacts, timings })
}
