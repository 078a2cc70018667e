//! Eigenvalue and eigenvector branches of `Q(t, xi)` tracked along the time grid.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigen_residual, eigenpairs, frob, modulus_order, CMat, EigenPair};
use crate::params::Tolerances;
use crate::symbol::lattice::{Lattice, TimeGrid};
use crate::symbol::matrix::MatrixSymbol;

/// Convention fixing which eigenvalue is branch 1, 2, ... at `t = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchOrder {
    /// `|lambda|` ascending, ties by real then imaginary part.
    #[default]
    Modulus,
    /// `Re(lambda) * sgn(xi)` descending, where `sgn(xi)` is the sign of the
    /// first nonzero component; falls back to `Modulus` at `xi = 0`. This
    /// labels `a(t) + b(t) xi` as the first branch of `a(t) +- b(t) xi` for
    /// either sign of `xi`.
    Oriented,
}

impl BranchOrder {
    pub fn compare(&self, xi: &[i64], a: &Complex64, b: &Complex64) -> Ordering {
        match self {
            BranchOrder::Modulus => modulus_order(a, b),
            BranchOrder::Oriented => match xi.iter().find(|&&x| x != 0) {
                None => modulus_order(a, b),
                Some(&x) => {
                    let s = x.signum() as f64;
                    (b.re * s).total_cmp(&(a.re * s)).then_with(|| modulus_order(a, b))
                }
            },
        }
    }
}

/// Two branches whose nearest-neighbour match was ambiguous at a time index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub pair: (usize, usize),
    pub t_index: usize,
}

/// Tracked branches at a single frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeBranches {
    pub xi: Vec<i64>,
    /// `lambda[k][j] = lambda_k(t_j, xi)`.
    pub lambda: Vec<Vec<Complex64>>,
    /// `vectors[k][j]`: unit eigenvector of branch `k` at `t_j`.
    pub vectors: Vec<Vec<Vec<Complex64>>>,
    /// `max_j |Q(t_j, xi)|_F`.
    pub q_norm: f64,
    /// Ambiguous matches between branches that are genuinely distinct.
    pub crossings: Vec<Crossing>,
    /// Pairs that agree to `eig_tol * |Q|` at every sample. Their labels are
    /// kept consistent with the branch order but no crossing is reported.
    pub coalesced: Vec<(usize, usize)>,
}

impl ModeBranches {
    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    pub fn has_crossing(&self) -> bool {
        !self.crossings.is_empty()
    }
}

fn sort_pairs(pairs: &mut [EigenPair], xi: &[i64], order: BranchOrder) {
    pairs.sort_by(|a, b| order.compare(xi, &a.value, &b.value));
}

fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm()
}

/// Greedy nearest-neighbour assignment `branch -> candidate`.
fn greedy(pred: &[Complex64], cands: &[EigenPair]) -> Vec<usize> {
    let m = pred.len();
    let mut d: Vec<(f64, usize, usize)> = Vec::with_capacity(m * m);
    for (k, p) in pred.iter().enumerate() {
        for (i, c) in cands.iter().enumerate() {
            d.push(((p - c.value).norm(), k, i));
        }
    }
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assign = vec![usize::MAX; m];
    let mut taken = vec![false; m];
    for (_, k, i) in d {
        if assign[k] == usize::MAX && !taken[i] {
            assign[k] = i;
            taken[i] = true;
        }
    }
    assign
}

/// Eigenpairs at every time sample, each checked against the residual contract.
fn sample_pairs(xi: &[i64], samples: &[CMat], tol: &Tolerances) -> Result<Vec<Vec<EigenPair>>> {
    samples
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let pairs = eigenpairs(a).map_err(|_| Error::EigenSolverFailure {
                xi: xi.to_vec(),
                t_index: j,
                residual: f64::NAN,
            })?;
            let scale = frob(a);
            for p in &pairs {
                let r = eigen_residual(a, p);
                if r > tol.eig_tol * scale || !r.is_finite() {
                    return Err(Error::EigenSolverFailure { xi: xi.to_vec(), t_index: j, residual: r });
                }
            }
            Ok(pairs)
        })
        .collect()
}

/// Track eigenvalue branches of `samples[j] = Q(t_j, xi)` in `t`.
///
/// Each step predicts `lambda_k(t_j)` by linear extrapolation and matches
/// greedily. A match is ambiguous when another candidate lies within
/// `gap_ratio` times the matched distance; such steps are resolved by
/// eigenvector overlap, or by the branch order when the candidates coincide.
/// The closing step from `t_{T-1}` back to `t_0` must return every branch to
/// itself.
pub fn track_mode(xi: &[i64], samples: &[CMat], order: BranchOrder, tol: &Tolerances) -> Result<ModeBranches> {
    let len = samples.len();
    let m = samples[0].nrows();
    let q_norm = samples.iter().map(frob).fold(0.0, f64::max);
    let floor = tol.eig_tol * q_norm;
    let mut all = sample_pairs(xi, samples, tol)?;
    sort_pairs(&mut all[0], xi, order);

    let mut lambda: Vec<Vec<Complex64>> = (0..m).map(|k| vec![all[0][k].value]).collect();
    let mut vectors: Vec<Vec<Vec<Complex64>>> = (0..m).map(|k| vec![all[0][k].vector.clone()]).collect();
    let mut events: Vec<Crossing> = Vec::new();

    for j in 1..=len {
        let cands = &all[j % len];
        let pred: Vec<Complex64> = (0..m)
            .map(|k| {
                let l = &lambda[k];
                if l.len() >= 2 {
                    l[l.len() - 1] * 2.0 - l[l.len() - 2]
                } else {
                    l[l.len() - 1]
                }
            })
            .collect();
        let mut assign = greedy(&pred, cands);
        let mut owner = vec![0usize; m];
        for (k, &i) in assign.iter().enumerate() {
            owner[i] = k;
        }
        for k in 0..m {
            for l in k + 1..m {
                let (i, i2) = (assign[k], assign[l]);
                let dk = (pred[k] - cands[i].value).norm().max(floor);
                let dl = (pred[l] - cands[i2].value).norm().max(floor);
                let ambiguous = (pred[k] - cands[i2].value).norm() < tol.gap_ratio * dk
                    || (pred[l] - cands[i].value).norm() < tol.gap_ratio * dl;
                if !ambiguous {
                    continue;
                }
                events.push(Crossing { pair: (k, l), t_index: j - 1 });
                let hk = vectors[k].last().unwrap();
                let hl = vectors[l].last().unwrap();
                let keep = overlap(hk, &cands[i].vector) + overlap(hl, &cands[i2].vector);
                let swap = overlap(hk, &cands[i2].vector) + overlap(hl, &cands[i].vector);
                let swapped = if (swap - keep).abs() > 0.2 {
                    swap > keep
                } else if (cands[i].value - cands[i2].value).norm() <= floor {
                    let prev = order.compare(xi, lambda[k].last().unwrap(), lambda[l].last().unwrap());
                    let now = order.compare(xi, &cands[i].value, &cands[i2].value);
                    prev != now && now != Ordering::Equal
                } else {
                    false
                };
                if swapped {
                    assign.swap(k, l);
                    owner[assign[k]] = k;
                    owner[assign[l]] = l;
                }
            }
        }
        if j < len {
            for k in 0..m {
                lambda[k].push(cands[assign[k]].value);
                vectors[k].push(cands[assign[k]].vector.clone());
            }
        } else {
            for (k, &i) in assign.iter().enumerate() {
                if i != k {
                    events.push(Crossing { pair: (k.min(i), k.max(i)), t_index: len - 1 });
                }
            }
        }
    }

    let mut coalesced = Vec::new();
    for k in 0..m {
        for l in k + 1..m {
            let gap = (0..len).map(|j| (lambda[k][j] - lambda[l][j]).norm()).fold(0.0, f64::max);
            if gap <= floor {
                coalesced.push((k, l));
            }
        }
    }
    let mut crossings: Vec<Crossing> = Vec::new();
    for e in events {
        if !coalesced.contains(&e.pair) && !crossings.iter().any(|c| c.pair == e.pair) {
            crossings.push(e);
        }
    }
    Ok(ModeBranches { xi: xi.to_vec(), lambda, vectors, q_norm, crossings, coalesced })
}

/// Frequencies the pipeline could not evaluate, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedMode {
    pub xi: Vec<i64>,
    pub reason: String,
}

/// Branches over a whole lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenField {
    pub lattice: Lattice,
    pub grid: TimeGrid,
    pub order: BranchOrder,
    pub modes: Vec<ModeBranches>,
    /// Points where a spatial expression is undefined (for example `1/xi1`
    /// at the origin); they are excluded like the exceptional set.
    pub undefined: Vec<SkippedMode>,
}

impl EigenField {
    pub fn crossing_modes(&self) -> impl Iterator<Item = &ModeBranches> {
        self.modes.iter().filter(|b| b.has_crossing())
    }
}

/// Sample `q` at `xi`; `Ok(None)` when a spatial expression is undefined there.
pub fn sample_symbol(q: &MatrixSymbol, xi: &[i64], ts: &crate::symbol::matrix::TimeSamples) -> Result<Option<Vec<CMat>>> {
    match q.sample_at(xi, ts) {
        Ok(s) => Ok(Some(s)),
        Err(Error::EvalDomain { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Eigenvalues and eigenvectors of `Q(t_j, xi)` on the lattice, tracked in `t`.
/// Crossings are flagged per frequency, not raised.
pub fn eigen_field(
    q: &MatrixSymbol,
    lattice: &Lattice,
    grid: &TimeGrid,
    order: BranchOrder,
    tol: &Tolerances,
) -> Result<EigenField> {
    if lattice.dim != q.n {
        return Err(Error::DimensionMismatch(format!("lattice is {}-dimensional, symbol has n = {}", lattice.dim, q.n)));
    }
    let ts = q.time_samples(grid.len);
    let points = lattice.points();
    let results: Vec<Result<std::result::Result<ModeBranches, SkippedMode>>> = points
        .par_iter()
        .map(|xi| match sample_symbol(q, xi, &ts)? {
            Some(samples) => Ok(Ok(track_mode(xi, &samples, order, tol)?)),
            None => Ok(Err(SkippedMode { xi: xi.clone(), reason: "symbol undefined".into() })),
        })
        .collect();
    let mut modes = Vec::new();
    let mut undefined = Vec::new();
    for r in results {
        match r? {
            Ok(b) => modes.push(b),
            Err(s) => undefined.push(s),
        }
    }
    Ok(EigenField { lattice: *lattice, grid: *grid, order, modes, undefined })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::trig::TrigPolynomial;
    use crate::symbol::matrix::SymbolEntry;

    fn example_st(a: TrigPolynomial, b: TrigPolynomial) -> MatrixSymbol {
        let e = |t: &TrigPolynomial, s: &str| SymbolEntry::new(t.clone(), s).unwrap();
        MatrixSymbol::new(2, 1, vec![vec![e(&a, "1"), e(&b, "xi1")], vec![e(&b, "xi1"), e(&a, "1")]]).unwrap()
    }

    #[test]
    fn diagonal_branches_follow_the_entries() {
        let s = TrigPolynomial::sin_affine(0.0, 1.0);
        let e = |t: TrigPolynomial| SymbolEntry::new(t, "1").unwrap();
        let q = MatrixSymbol::new(
            2,
            1,
            vec![vec![e(s.clone()), SymbolEntry::zero()], vec![SymbolEntry::zero(), e(s.scale(Complex64::new(2.0, 0.0)))]],
        )
        .unwrap();
        let ts = q.time_samples(32);
        let b = track_mode(&[1], &q.sample_at(&[1], &ts).unwrap(), BranchOrder::Modulus, &Tolerances::default()).unwrap();
        // Both eigenvalues vanish at t = 0 and t = pi; the crossing is real.
        assert!(b.has_crossing());
        let grid = TimeGrid::new(32).unwrap();
        for (j, t) in grid.points().iter().enumerate().skip(1) {
            if j == 16 {
                continue;
            }
            let l: Vec<f64> = b.lambda.iter().map(|l| l[j].re).collect();
            assert!(l.iter().any(|v| (v - t.sin()).abs() < 1e-14));
            assert!(l.iter().any(|v| (v - 2.0 * t.sin()).abs() < 1e-14));
        }
    }

    #[test]
    fn example_st_branches_are_smooth_and_oriented() {
        let q = example_st(TrigPolynomial::sin_affine(0.0, 1.0), TrigPolynomial::real_constant(1.0));
        let grid = TimeGrid::new(64).unwrap();
        let ts = q.time_samples(64);
        for x in [-5i64, 3, 17] {
            let b = track_mode(&[x], &q.sample_at(&[x], &ts).unwrap(), BranchOrder::Oriented, &Tolerances::default())
                .unwrap();
            assert!(!b.has_crossing());
            for (j, t) in grid.points().iter().enumerate() {
                assert!((b.lambda[0][j].re - (t.sin() + x as f64)).abs() < 1e-13);
                assert!((b.lambda[1][j].re - (t.sin() - x as f64)).abs() < 1e-13);
                let h = &b.vectors[0][j];
                assert!((h[0] - h[1]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn vanishing_coupling_is_a_crossing() {
        let q = example_st(TrigPolynomial::zero(), TrigPolynomial::cos_affine(0.0, 1.0));
        let ts = q.time_samples(64);
        let b = track_mode(&[2], &q.sample_at(&[2], &ts).unwrap(), BranchOrder::Modulus, &Tolerances::default()).unwrap();
        assert!(b.has_crossing());
    }
}
