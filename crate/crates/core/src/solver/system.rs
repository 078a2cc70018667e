//! Triangular back-substitution and the full system solve `u_hat = S v`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{d_t, sup_norm, ModeTable};
use crate::linalg::CMat;
use crate::params::Tolerances;
use crate::report::ext_f64;
use crate::symbol::MatrixSymbol;
use crate::triangular::branches::sample_symbol;
use crate::triangular::smooth::{analyze_mode, ModeForm, ModeOutcome};
use crate::triangular::BranchOrder;

use super::periodic::{solve_periodic_mode, Formula};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Diagonal and strictly upper part of a triangular system at one frequency.
#[derive(Debug, Clone)]
pub struct TriangularMode {
    /// `lambda[k][j]`.
    pub lambda: Vec<Vec<Complex64>>,
    /// Strictly upper triangular `N(t_j)`.
    pub n: Vec<CMat>,
}

impl From<&ModeForm> for TriangularMode {
    fn from(f: &ModeForm) -> Self {
        TriangularMode { lambda: f.lambda.clone(), n: f.n.clone() }
    }
}

/// Per-frequency outcome of a successful solve.
#[derive(Debug, Clone, Serialize)]
pub struct ModeRecord {
    pub xi: Vec<i64>,
    /// Formula used for each row.
    pub formulas: Vec<Formula>,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub residual: f64,
    /// Steps of the twist-correction loop (0 when `B` vanishes).
    pub iterations: usize,
}

/// A frequency the solver refused, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct SkippedSolve {
    pub xi: Vec<i64>,
    pub reason: String,
    pub detail: String,
}

impl SkippedSolve {
    fn new(xi: &[i64], e: &Error) -> Self {
        SkippedSolve { xi: xi.to_vec(), reason: e.kind().into(), detail: e.to_string() }
    }
}

/// Solution table with per-frequency records and skips.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub v: ModeTable,
    pub records: Vec<ModeRecord>,
    pub skipped: Vec<SkippedSolve>,
}

/// Serializable summary of a [`ModeSolution`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub solved: usize,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub max_residual: f64,
    pub forward_rows: usize,
    pub backward_rows: usize,
    pub max_iterations: usize,
    pub skipped: Vec<SkippedSolve>,
}

impl ModeSolution {
    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> SolveSummary {
        let count = |f: Formula| self.records.iter().flat_map(|r| &r.formulas).filter(|&&x| x == f).count();
        SolveSummary {
            solved: self.records.len(),
            max_residual: self.max_residual(),
            forward_rows: count(Formula::Forward),
            backward_rows: count(Formula::Backward),
            max_iterations: self.records.iter().map(|r| r.iterations).max().unwrap_or(0),
            skipped: self.skipped.clone(),
        }
    }
}

/// Solve `(D_t + Lambda + N) v = g` at one frequency, last row first, each
/// row with the right-hand side corrected by the rows already solved.
pub fn back_substitute_mode(
    mode: &TriangularMode,
    g: &[Vec<Complex64>],
    tol: &Tolerances,
) -> Result<(Vec<Vec<Complex64>>, Vec<Formula>)> {
    let m = mode.lambda.len();
    if g.len() != m || mode.n.iter().any(|n| n.nrows() != m || n.ncols() != m) {
        return Err(Error::ShapeMismatch(format!("triangular system of size {m}, right-hand side with {} rows", g.len())));
    }
    let len = g.first().map_or(0, Vec::len);
    if mode.n.len() != len || mode.lambda.iter().chain(g).any(|r| r.len() != len) {
        return Err(Error::ShapeMismatch("rows of different lengths".into()));
    }
    let mut v = vec![Vec::new(); m];
    let mut formulas = vec![Formula::Forward; m];
    for k in (0..m).rev() {
        let rhs: Vec<Complex64> = (0..len)
            .map(|t| g[k][t] - ((k + 1)..m).map(|j| mode.n[t][(k, j)] * v[j][t]).sum::<Complex64>())
            .collect();
        let sol = solve_periodic_mode(&mode.lambda[k], &rhs, tol)?;
        v[k] = sol.v;
        formulas[k] = sol.formula;
    }
    Ok((v, formulas))
}

/// `A v` row-wise at every sample.
fn apply(a: &[CMat], v: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let m = v.len();
    let len = a.len();
    let mut out = vec![vec![ZERO; len]; m];
    for t in 0..len {
        for r in 0..m {
            out[r][t] = (0..m).map(|c| a[t][(r, c)] * v[c][t]).sum();
        }
    }
    out
}

/// `sup |D_t v + A v - g| / sup |g|` (absolute when `g = 0`).
pub fn system_residual(a: &[CMat], v: &[Vec<Complex64>], g: &[Vec<Complex64>]) -> Result<f64> {
    let av = apply(a, v);
    let mut worst = 0.0f64;
    for (k, row) in v.iter().enumerate() {
        let dv = d_t(row)?;
        for t in 0..row.len() {
            worst = worst.max((dv[t] + av[k][t] - g[k][t]).norm());
        }
    }
    let scale = g.iter().map(|r| sup_norm(r)).fold(0.0, f64::max);
    Ok(worst / if scale > 0.0 { scale } else { 1.0 })
}

fn triangular_matrix(mode: &TriangularMode) -> Vec<CMat> {
    mode.n
        .iter()
        .enumerate()
        .map(|(t, n)| {
            let mut a = n.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += mode.lambda[k][t];
            }
            a
        })
        .collect()
}

/// Back-substitution over every frequency of `g`. Frequencies with a
/// resonant row, or missing from `modes`, are skipped and listed.
pub fn back_substitute(
    modes: &BTreeMap<Vec<i64>, TriangularMode>,
    g: &ModeTable,
    tol: &Tolerances,
) -> Result<ModeSolution> {
    type Solved = (Vec<i64>, Vec<Vec<Complex64>>, ModeRecord);
    let results: Vec<Result<std::result::Result<Solved, SkippedSolve>>> = g
        .data
        .par_iter()
        .map(|(xi, rows)| {
            let Some(mode) = modes.get(xi) else {
                return Ok(Err(SkippedSolve {
                    xi: xi.clone(),
                    reason: "MissingMode".into(),
                    detail: "no triangular data at this frequency".into(),
                }));
            };
            match back_substitute_mode(mode, rows, tol) {
                Ok((v, formulas)) => {
                    let residual = system_residual(&triangular_matrix(mode), &v, rows)?;
                    Ok(Ok((xi.clone(), v, ModeRecord { xi: xi.clone(), formulas, residual, iterations: 0 })))
                }
                Err(e @ Error::Resonant { .. }) => Ok(Err(SkippedSolve::new(xi, &e))),
                Err(e) => Err(e),
            }
        })
        .collect();
    collect(g.t_len, g.dim, g.components, results)
}

type Solved = std::result::Result<(Vec<i64>, Vec<Vec<Complex64>>, ModeRecord), SkippedSolve>;

fn collect(t_len: usize, dim: usize, components: usize, results: Vec<Result<Solved>>) -> Result<ModeSolution> {
    let mut v = ModeTable::new(t_len, dim, components)?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r? {
            Ok((xi, rows, rec)) => {
                v.insert(xi, rows)?;
                records.push(rec);
            }
            Err(s) => skipped.push(s),
        }
    }
    Ok(ModeSolution { v, records, skipped })
}

/// Solve `D_t u + Q(t, xi) u = f` mode by mode through the triangular form:
/// `g = S^{-1} f`, then `(D_t + Lambda + N) v = g - B v` by fixed-point
/// iteration on the twist `B = S^{-1} D_t S`, and `u = S v`. The reported
/// residual is that of the original system.
pub fn solve_full(q: &MatrixSymbol, f: &ModeTable, order: BranchOrder, tol: &Tolerances) -> Result<ModeSolution> {
    if f.components != q.m || f.dim != q.n {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} components over {} variables, symbol is {}x{} over {}",
            f.components, f.dim, q.m, q.m, q.n
        )));
    }
    if !f.t_len.is_power_of_two() {
        return Err(Error::NonPowerOfTwo(f.t_len));
    }
    let ts = q.time_samples(f.t_len);
    let results: Vec<Result<Solved>> = f
        .data
        .par_iter()
        .map(|(xi, rows)| {
            let form = match analyze_mode(q, &ts, xi, order, tol)? {
                ModeOutcome::Undefined => {
                    return Ok(Err(SkippedSolve {
                        xi: xi.clone(),
                        reason: "EvalDomainError".into(),
                        detail: "symbol undefined at this frequency".into(),
                    }))
                }
                ModeOutcome::Tracked { form: Err(reason), .. } => {
                    return Ok(Err(SkippedSolve::new(xi, &reason.to_error(xi))))
                }
                ModeOutcome::Tracked { form: Ok(form), .. } => form,
            };
            let samples = sample_symbol(q, xi, &ts)?.expect("symbol was defined during analysis");
            match solve_form(&form, rows, tol) {
                Ok((v, formulas, iterations)) => {
                    let u = apply(&form.s, &v);
                    let residual = system_residual(&samples, &u, rows)?;
                    if residual > tol.ode_tol {
                        let e = Error::ResidualTooLarge { residual, tol: tol.ode_tol, context: "original system".into() };
                        return Ok(Err(SkippedSolve::new(xi, &e)));
                    }
                    Ok(Ok((xi.clone(), u, ModeRecord { xi: xi.clone(), formulas, residual, iterations })))
                }
                Err(e @ (Error::Resonant { .. } | Error::NoConvergence { .. })) => Ok(Err(SkippedSolve::new(xi, &e))),
                Err(e) => Err(e),
            }
        })
        .collect();
    collect(f.t_len, f.dim, f.components, results)
}

fn solve_form(
    form: &ModeForm,
    f: &[Vec<Complex64>],
    tol: &Tolerances,
) -> Result<(Vec<Vec<Complex64>>, Vec<Formula>, usize)> {
    let tri = TriangularMode::from(form);
    let g = apply(&form.s_inv, f);
    let (mut v, formulas) = back_substitute_mode(&tri, &g, tol)?;
    let b_norm = form.b.iter().map(|b| b.iter().map(|z| z.norm()).fold(0.0, f64::max)).fold(0.0, f64::max);
    if b_norm == 0.0 {
        return Ok((v, formulas, 0));
    }
    for it in 1..=tol.max_iterations {
        let bv = apply(&form.b, &v);
        let rhs: Vec<Vec<Complex64>> =
            g.iter().zip(&bv).map(|(gr, br)| gr.iter().zip(br).map(|(a, b)| a - b).collect()).collect();
        let (next, formulas) = back_substitute_mode(&tri, &rhs, tol)?;
        let mut change = 0.0f64;
        let mut size = 0.0f64;
        for (a, b) in next.iter().zip(&v) {
            for (x, y) in a.iter().zip(b) {
                change = change.max((x - y).norm());
                size = size.max(x.norm());
            }
        }
        v = next;
        if change <= tol.fixed_point_tol * size || size == 0.0 {
            return Ok((v, formulas, it));
        }
    }
    Err(Error::NoConvergence { iterations: tol.max_iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn two_by_two_constant_example() {
        let tol = Tolerances::default();
        let len = 16;
        for xi in [-3i64, 1, 5] {
            let mut n = CMat::zeros(2, 2);
            n[(0, 1)] = c(xi as f64);
            let mode = TriangularMode { lambda: vec![vec![c(0.5); len]; 2], n: vec![n; len] };
            let (v, formulas) = back_substitute_mode(&mode, &[vec![c(0.0); len], vec![c(1.0); len]], &tol).unwrap();
            assert_eq!(formulas, vec![Formula::Forward; 2]);
            for t in 0..len {
                assert!((v[1][t] - c(2.0)).norm() < 1e-13);
                assert!((v[0][t] - c(-4.0 * xi as f64)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn resonant_rows_are_skipped() {
        let tol = Tolerances::default();
        let len = 16;
        let mut modes = BTreeMap::new();
        let mut g = ModeTable::new(len, 1, 1).unwrap();
        for xi in [0i64, 1, 2] {
            let lam = 0.5 * xi as f64;
            modes.insert(vec![xi], TriangularMode { lambda: vec![vec![c(lam); len]], n: vec![CMat::zeros(1, 1); len] });
            let row: Vec<Complex64> = (0..len).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / len as f64)).collect();
            g.insert(vec![xi], vec![row]).unwrap();
        }
        let sol = back_substitute(&modes, &g, &tol).unwrap();
        let skipped: Vec<_> = sol.skipped.iter().map(|s| s.xi.clone()).collect();
        assert_eq!(skipped, vec![vec![0], vec![2]]);
        assert_eq!(sol.records.len(), 1);
        assert!(sol.max_residual() < 1e-12);
    }
}
