//! Eigenvalue expansions `lambda_{eps,j}(eta) = lambda_j(eta) + sum_k sigma_{j,k}(eta) eps^k`
//! of a perturbed constant operator `L + eps Q`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, frob, lstsq, CMat};
use crate::params::Tolerances;
use crate::report::ext_f64;
use crate::symbol::lattice::norm;
use crate::symbol::{Lattice, MatrixSymbol};
use crate::triangular::schur::worst_commutator;
use crate::triangular::simultaneous_schur;

use super::fit::Sweep;
use super::verdict::{BranchEvidence, GHVerdict};

/// Grid and fit settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSettings {
    /// Sample values of `eps`, symmetric about zero.
    pub epsilon: Vec<f64>,
    pub degree: usize,
    /// Largest admissible `|eps|`.
    pub epsilon_max: f64,
    /// `eps` at which the fitted eigenvalues are tested.
    pub epsilon_eval: f64,
}

impl Default for PerturbationSettings {
    fn default() -> Self {
        PerturbationSettings {
            epsilon: (-20..=20).map(|k| k as f64 * 0.005).collect(),
            degree: 4,
            epsilon_max: 0.1,
            epsilon_eval: 0.05,
        }
    }
}

/// Coefficients at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPoint {
    pub eta: Vec<i64>,
    /// `L` and `Q` commute here and the linear law is exact.
    pub exact: bool,
    /// `sigma[j][k]`, with `sigma[j][0]` the fitted unperturbed eigenvalue.
    pub sigma: Vec<Vec<Complex64>>,
    /// Unperturbed eigenvalues `lambda_j(eta)`.
    pub lambda: Vec<Complex64>,
    /// Largest deviation of the fit from the tracked eigenvalues.
    #[serde(with = "ext_f64")]
    pub residual: f64,
}

impl PerturbationPoint {
    /// `sum_k sigma[j][k] eps^k`.
    pub fn eval(&self, j: usize, eps: f64) -> Complex64 {
        self.sigma[j].iter().rev().fold(Complex64::new(0.0, 0.0), |acc, s| acc * eps + s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFit {
    pub epsilon: Vec<f64>,
    pub degree: usize,
    pub points: Vec<PerturbationPoint>,
    /// Frequencies inside the exceptional ball where branches met across `eps`.
    pub excluded: Vec<Vec<i64>>,
    #[serde(with = "ext_f64")]
    pub max_residual: f64,
}

fn validate(s: &PerturbationSettings) -> Result<Vec<f64>> {
    if s.epsilon.iter().any(|e| !e.is_finite() || e.abs() > s.epsilon_max) {
        return Err(Error::InvalidInput(format!("epsilon grid must lie in [-{0}, {0}]", s.epsilon_max)));
    }
    if s.epsilon_eval.abs() > s.epsilon_max {
        return Err(Error::InvalidInput(format!("epsilon_eval must satisfy |eps| <= {}", s.epsilon_max)));
    }
    let mut grid = s.epsilon.clone();
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let symmetric = grid.iter().all(|e| grid.iter().any(|f| (e + f).abs() <= 1e-12 * s.epsilon_max));
    if !symmetric {
        return Err(Error::InvalidInput("epsilon grid must be symmetric about 0".into()));
    }
    if grid.len() < s.degree + 1 {
        return Err(Error::InvalidInput(format!(
            "{} distinct epsilon values cannot fit degree {}",
            grid.len(),
            s.degree
        )));
    }
    Ok(grid)
}

/// Greedy nearest assignment of `cand` to `pred`. `None` when a branch has
/// a competing candidate within `gap_ratio` times its own distance.
fn assign(pred: &[Complex64], cand: &[Complex64], floor: f64, gap_ratio: f64) -> Option<Vec<Complex64>> {
    let m = pred.len();
    let mut pairs: Vec<(f64, usize, usize)> =
        (0..m).flat_map(|j| (0..m).map(move |c| (j, c))).map(|(j, c)| ((pred[j] - cand[c]).norm(), j, c)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut taken = vec![None; m];
    let mut used = vec![false; m];
    for (_, j, c) in pairs {
        if taken[j].is_none() && !used[c] {
            taken[j] = Some(c);
            used[c] = true;
        }
    }
    let taken: Vec<usize> = taken.into_iter().map(|c| c.expect("square assignment")).collect();
    for j in 0..m {
        let own = cand[taken[j]];
        let d_own = (pred[j] - own).norm();
        for (c, other) in cand.iter().enumerate() {
            if c == taken[j] || (other - own).norm() <= floor {
                continue;
            }
            if (pred[j] - other).norm() <= gap_ratio * d_own.max(floor) {
                return None;
            }
        }
    }
    Some(taken.into_iter().map(|c| cand[c]).collect())
}

/// Track the eigenvalues of `l + eps q` from `eps = 0` outward along `eps`
/// (ascending). Returns the unperturbed eigenvalues and the shifts
/// `delta[i][j] = lambda_j(eps_i) - lambda_j(0)`, or `None` on a crossing.
/// Each shift is taken from the spectrum of `l - lambda_j(0) + eps q`, so
/// small shifts keep their relative accuracy.
/// Unperturbed eigenvalues and, per branch, the eigenvalue at each `eps`.
type Tracks = (Vec<Complex64>, Vec<Vec<Complex64>>);

fn track(l: &CMat, q: &CMat, eps: &[f64], tol: &Tolerances) -> Result<Option<Tracks>> {
    let zero = eps.iter().position(|&e| e == 0.0).expect("grid contains zero");
    let m = l.nrows();
    let base = eigenvalues(l)?;
    let mut out = vec![Vec::new(); eps.len()];
    out[zero] = vec![Complex64::new(0.0, 0.0); m];
    let scale = frob(l) + eps.iter().fold(0.0f64, |a, e| a.max(e.abs())) * frob(q);
    let floor = tol.eig_tol * (1.0 + scale);
    for side in [1i64, -1] {
        let mut idx = zero as i64;
        let mut prev: Option<usize> = None;
        loop {
            let next = idx + side;
            if next < 0 || next as usize >= eps.len() {
                break;
            }
            let (cur, nx) = (idx as usize, next as usize);
            let at = |i: usize| -> Vec<Complex64> { out[i].iter().zip(&base).map(|(d, b)| b + d).collect() };
            let pred: Vec<Complex64> = match prev {
                Some(p) => {
                    let r = (eps[nx] - eps[cur]) / (eps[cur] - eps[p]);
                    at(cur).iter().zip(at(p)).map(|(a, b)| a + (a - b) * r).collect()
                }
                None => at(cur),
            };
            let perturbed = l + q * Complex64::new(eps[nx], 0.0);
            let cand = eigenvalues(&perturbed)?;
            let Some(assigned) = assign(&pred, &cand, floor, tol.gap_ratio) else {
                return Ok(None);
            };
            let mut deltas = Vec::with_capacity(m);
            for j in 0..m {
                let shifted = &perturbed - CMat::identity(m, m) * base[j];
                let target = assigned[j] - base[j];
                let d = eigenvalues(&shifted)?
                    .into_iter()
                    .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
                    .expect("non-empty spectrum");
                deltas.push(d);
            }
            out[nx] = deltas;
            prev = Some(cur);
            idx = next;
        }
    }
    Ok(Some((base, out)))
}

/// Real least squares of a complex series against powers of `eps / scale`.
fn poly_fit(eps: &[f64], values: &[Complex64], degree: usize) -> Result<Vec<Complex64>> {
    let scale = eps.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let s: Vec<f64> = eps.iter().map(|e| e / scale).collect();
    let v = DMatrix::from_fn(eps.len(), degree + 1, |r, c| s[r].powi(c as i32));
    let rhs = DMatrix::from_fn(eps.len(), 2, |r, c| if c == 0 { values[r].re } else { values[r].im });
    let coef = lstsq(&v, &rhs)?;
    Ok((0..=degree).map(|k| Complex64::new(coef[(k, 0)], coef[(k, 1)]) / scale.powi(k as i32)).collect())
}

/// Expansion at one frequency. `Ok(None)` signals a crossing along `eps`.
pub fn expand_point(
    eta: &[i64],
    l: &CMat,
    q: &CMat,
    grid: &[f64],
    degree: usize,
    tol: &Tolerances,
) -> Result<Option<PerturbationPoint>> {
    let m = l.nrows();
    let commuting = worst_commutator(&[l.clone(), q.clone()]).map(|(_, c)| c <= tol.comm_tol).unwrap_or(true);
    if commuting {
        let s = simultaneous_schur(&[l.clone(), q.clone()], tol)?;
        let tl = s.adjoint() * l * &s;
        let tq = s.adjoint() * q * &s;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| crate::linalg::modulus_order(&tl[(a, a)], &tl[(b, b)]));
        let sigma = order
            .iter()
            .map(|&j| {
                let mut row = vec![Complex64::new(0.0, 0.0); degree + 1];
                row[0] = tl[(j, j)];
                if degree >= 1 {
                    row[1] = tq[(j, j)];
                }
                row
            })
            .collect();
        let lambda = order.iter().map(|&j| tl[(j, j)]).collect();
        return Ok(Some(PerturbationPoint { eta: eta.to_vec(), exact: true, sigma, lambda, residual: 0.0 }));
    }
    let Some((base, deltas)) = track(l, q, grid, tol)? else {
        return Ok(None);
    };
    let mut sigma = Vec::with_capacity(m);
    let mut residual: f64 = 0.0;
    for j in 0..m {
        let series: Vec<Complex64> = deltas.iter().map(|row| row[j]).collect();
        let mut coef = poly_fit(grid, &series, degree)?;
        for (e, v) in grid.iter().zip(&series) {
            let p = coef.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, s| acc * e + s);
            residual = residual.max((p - v).norm());
        }
        coef[0] += base[j];
        sigma.push(coef);
    }
    Ok(Some(PerturbationPoint { eta: eta.to_vec(), exact: false, sigma, lambda: base, residual }))
}

/// Fit the expansion at every lattice point and test the perturbed operator
/// at `settings.epsilon_eval` with the full-lattice eigenvalue criterion.
/// When `L` and `Q` commute the linear law `lambda_j + eps kappa_j` is exact.
pub fn perturbation_track(
    l: &MatrixSymbol,
    q: &MatrixSymbol,
    settings: &PerturbationSettings,
    lattice: &Lattice,
    tol: &Tolerances,
) -> Result<(PerturbationFit, GHVerdict)> {
    if l.m != q.m || l.n != q.n {
        return Err(Error::ShapeMismatch("L and Q must have the same size and dimension".into()));
    }
    if lattice.dim != l.n {
        return Err(Error::DimensionMismatch(format!(
            "lattice has dimension {}, symbol has {} frequency variables",
            lattice.dim, l.n
        )));
    }
    if !l.is_time_independent() || !q.is_time_independent() {
        return Err(Error::InvalidInput("perturbation tracking needs t-independent symbols".into()));
    }
    let grid = validate(settings)?;

    struct State {
        points: Vec<PerturbationPoint>,
        excluded: Vec<Vec<i64>>,
        undefined: Vec<Vec<i64>>,
    }
    let state = lattice.try_par_fold(
        || State { points: Vec::new(), excluded: Vec::new(), undefined: Vec::new() },
        |s, eta| {
            let (lm, qm) = match (l.eval_constant(eta), q.eval_constant(eta)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::EvalDomain { .. }), _) | (_, Err(Error::EvalDomain { .. })) => {
                    s.undefined.push(eta.to_vec());
                    return Ok(());
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            match expand_point(eta, &lm, &qm, &grid, settings.degree, tol)? {
                Some(p) => {
                    let scale = 1.0 + p.lambda.iter().map(|z| z.norm()).fold(0.0, f64::max);
                    let limit = tol.perturb_fit_tol * scale;
                    if p.residual > limit {
                        return Err(Error::ResidualTooLarge {
                            residual: p.residual,
                            tol: limit,
                            context: format!("perturbation fit at eta = {eta:?}"),
                        });
                    }
                    s.points.push(p);
                }
                None if norm(eta) <= tol.r_exc => s.excluded.push(eta.to_vec()),
                None => return Err(Error::BranchCrossingAcrossEpsilon { xi: eta.to_vec() }),
            }
            Ok(())
        },
        |a, b| {
            a.points.extend(b.points);
            a.excluded.extend(b.excluded);
            a.undefined.extend(b.undefined);
        },
    )?;

    let m = l.m;
    let mut sweeps: Vec<Sweep> = (0..m).map(|_| Sweep::new(*lattice, tol.r_exc)).collect();
    for p in &state.points {
        let mut vals: Vec<Complex64> = (0..m).map(|j| p.eval(j, settings.epsilon_eval)).collect();
        vals.sort_by(crate::linalg::modulus_order);
        for (j, z) in vals.iter().enumerate() {
            sweeps[j].push(&p.eta, z.norm(), z.norm() <= tol.res_tol);
        }
    }
    let branches = sweeps
        .iter()
        .enumerate()
        .map(|(j, sw)| BranchEvidence::from_fit(j, "|lambda_eps,j(eta)|", sw.fit(tol)))
        .collect();
    let mut verdict = GHVerdict::new("eigenvalue lower bound for the perturbed operator at epsilon_eval", branches);
    verdict.undefined = state.undefined;
    verdict.notes.push(format!(
        "expansion of degree {} fitted on {} epsilon values; eigenvalues evaluated at epsilon = {}",
        settings.degree,
        grid.len(),
        settings.epsilon_eval
    ));
    if !state.excluded.is_empty() {
        verdict.notes.push(format!(
            "{} frequencies inside the exceptional ball have branches meeting along epsilon",
            state.excluded.len()
        ));
    }
    let max_residual = state.points.iter().map(|p| p.residual).fold(0.0, f64::max);
    let fit = PerturbationFit {
        epsilon: grid,
        degree: settings.degree,
        points: state.points,
        excluded: state.excluded,
        max_residual,
    };
    Ok((fit, verdict))
}
