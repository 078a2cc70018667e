//! Smooth triangularization `S^{-1} Q S = Lambda + N` built one eigenvector
//! at a time, and the twist `B = S^{-1} D_t S`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::d_t;
use crate::linalg::{frob, CMat, ONE};
use crate::params::Tolerances;
use crate::symbol::lattice::{Lattice, TimeGrid};
use crate::symbol::matrix::{MatrixSymbol, TimeSamples};
use crate::triangular::branches::{sample_symbol, track_mode, BranchOrder, EigenField, ModeBranches, SkippedMode};

/// Relative spread below which a sampled eigenvector ratio is taken to be
/// constant in `t`. Snapping keeps `B` exactly zero for frames that do not
/// depend on `t`, instead of leaving eigen-solver rounding in it.
pub const SNAP_TOL: f64 = 1e-12;

/// One reduction step on a `k x k` field.
#[derive(Debug, Clone)]
pub struct SmoothStep {
    /// Component used as the pivot (`0` means no permutation).
    pub pivot: usize,
    pub s: Vec<CMat>,
    pub s_inv: Vec<CMat>,
    /// Trailing `(k-1) x (k-1)` block of `S^{-1} A S`.
    pub e: Vec<CMat>,
}

/// Pivot maximizing `min_t |h_j(t)| / |h(t)|`. Ratios within [`SNAP_TOL`]
/// of each other count as ties, which go to the first index.
pub(crate) fn choose_pivot(h: &[Vec<Complex64>]) -> (usize, f64) {
    let k = h[0].len();
    let mut best = (0usize, -1.0f64);
    for j in 0..k {
        let ratio = h
            .iter()
            .map(|v| {
                let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if n == 0.0 {
                    0.0
                } else {
                    v[j].norm() / n
                }
            })
            .fold(f64::INFINITY, f64::min);
        if ratio > best.1 + SNAP_TOL {
            best = (j, ratio);
        }
    }
    best
}

/// Frame whose first column is the eigenvector `h`, normalized so that its
/// pivot component equals one, and identity elsewhere. When the pivot is not
/// the first component the two are swapped by a permutation `P`, giving
/// `S = P S~` and `S^{-1} = S~^{-1} P`, where `S~^{-1}` is `S~` with the
/// signs of its first column flipped below the diagonal.
pub fn smooth_step(xi: &[i64], a: &[CMat], h: &[Vec<Complex64>], stage: usize, tol: &Tolerances) -> Result<SmoothStep> {
    let k = h[0].len();
    let (pivot, best) = choose_pivot(h);
    if best < tol.pivot_tol {
        return Err(Error::NoPivot { xi: xi.to_vec(), branch: stage, best: best.max(0.0) });
    }
    let perm = |i: usize| {
        if i == 0 {
            pivot
        } else if i == pivot {
            0
        } else {
            i
        }
    };
    let mut v: Vec<Vec<Complex64>> =
        h.iter().map(|hv| (0..k).map(|i| hv[perm(i)] / hv[pivot]).collect()).collect();
    let v0 = v[0].clone();
    let scale = v0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let spread = v
        .iter()
        .map(|w| w.iter().zip(&v0).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if spread <= SNAP_TOL * scale {
        v.iter_mut().for_each(|w| w.clone_from(&v0));
    }
    let mut s = Vec::with_capacity(h.len());
    let mut s_inv = Vec::with_capacity(h.len());
    let mut e = Vec::with_capacity(h.len());
    for (j, w) in v.iter().enumerate() {
        let mut st = CMat::identity(k, k);
        let mut st_inv = CMat::identity(k, k);
        for i in 1..k {
            st[(i, 0)] = w[i];
            st_inv[(i, 0)] = -w[i];
        }
        // Row permutation of S~ and column permutation of S~^{-1}.
        let sj = CMat::from_fn(k, k, |r, c| st[(perm(r), c)]);
        let sj_inv = CMat::from_fn(k, k, |r, c| st_inv[(r, perm(c))]);
        let t = &sj_inv * &a[j] * &sj;
        e.push(t.view((1, 1), (k - 1, k - 1)).into_owned());
        s.push(sj);
        s_inv.push(sj_inv);
    }
    Ok(SmoothStep { pivot, s, s_inv, e })
}

/// Triangular form at one frequency, sampled on the time grid.
#[derive(Debug, Clone)]
pub struct ModeForm {
    pub xi: Vec<i64>,
    /// Pivot component chosen at each reduction stage.
    pub pivots: Vec<usize>,
    pub s: Vec<CMat>,
    pub s_inv: Vec<CMat>,
    /// `lambda[k][j]`: diagonal of `Lambda`, in branch order.
    pub lambda: Vec<Vec<Complex64>>,
    /// Strictly upper triangular part.
    pub n: Vec<CMat>,
    /// `B = S^{-1} D_t S`.
    pub b: Vec<CMat>,
    /// `max_t |S^{-1} Q S - (Lambda + N)|_F / max_t |Q|_F`.
    pub residual: f64,
    /// `max_t |S S^{-1} - I|_F`.
    pub inverse_error: f64,
    /// `max_t |S|_F |S^{-1}|_F`.
    pub condition: f64,
}

impl ModeForm {
    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    /// `N^m` at every sample, which must vanish identically.
    pub fn nilpotency_defect(&self) -> f64 {
        let m = self.m();
        self.n
            .iter()
            .map(|n| {
                let mut p = CMat::identity(m, m);
                for _ in 0..m {
                    p = &p * n;
                }
                frob(&p)
            })
            .fold(0.0, f64::max)
    }
}

fn embed(block: &CMat, m: usize) -> CMat {
    let k = block.nrows();
    let mut out = CMat::identity(m, m);
    out.view_mut((m - k, m - k), (k, k)).copy_from(block);
    out
}

/// Entrywise `D_t` of a sampled matrix field.
pub fn d_t_field(f: &[CMat]) -> Result<Vec<CMat>> {
    let (r, c) = f[0].shape();
    let mut out = vec![CMat::zeros(r, c); f.len()];
    for i in 0..r {
        for j in 0..c {
            let col: Vec<Complex64> = f.iter().map(|a| a[(i, j)]).collect();
            for (t, v) in d_t(&col)?.into_iter().enumerate() {
                out[t][(i, j)] = v;
            }
        }
    }
    Ok(out)
}

/// Triangularize `samples[j] = Q(t_j, xi)` with the tracked branches.
pub fn triangularize_mode(samples: &[CMat], br: &ModeBranches, tol: &Tolerances) -> Result<ModeForm> {
    if let Some(c) = br.crossings.first() {
        return Err(Error::BranchCrossing { xi: br.xi.clone(), pair: c.pair, t_index: c.t_index });
    }
    let m = br.m();
    let len = samples.len();
    let mut acc = vec![CMat::identity(m, m); len];
    let mut acc_inv = vec![CMat::identity(m, m); len];
    let mut block: Vec<CMat> = samples.to_vec();
    let mut pivots = Vec::new();
    for stage in 0..m.saturating_sub(1) {
        let h: Vec<Vec<Complex64>> = (0..len)
            .map(|j| {
                let w = &acc_inv[j] * nalgebra::DVector::from_column_slice(&br.vectors[stage][j]);
                w.iter().skip(stage).copied().collect()
            })
            .collect();
        let step = smooth_step(&br.xi, &block, &h, stage, tol)?;
        for j in 0..len {
            acc[j] = &acc[j] * embed(&step.s[j], m);
            acc_inv[j] = embed(&step.s_inv[j], m) * &acc_inv[j];
        }
        pivots.push(step.pivot);
        block = step.e;
    }

    let q_norm = br.q_norm;
    let mut n = Vec::with_capacity(len);
    let mut worst: f64 = 0.0;
    let mut inverse_error: f64 = 0.0;
    let mut condition: f64 = 0.0;
    for j in 0..len {
        let t = &acc_inv[j] * &samples[j] * &acc[j];
        let mut defect: f64 = 0.0;
        let mut nj = CMat::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                if r > c {
                    defect += t[(r, c)].norm_sqr();
                } else if r == c {
                    defect += (t[(r, r)] - br.lambda[r][j]).norm_sqr();
                } else {
                    nj[(r, c)] = t[(r, c)];
                }
            }
        }
        worst = worst.max(defect.sqrt());
        let mut e = &acc[j] * &acc_inv[j];
        for i in 0..m {
            e[(i, i)] -= ONE;
        }
        inverse_error = inverse_error.max(frob(&e));
        condition = condition.max(frob(&acc[j]) * frob(&acc_inv[j]));
        n.push(nj);
    }
    let residual = if q_norm > 0.0 { worst / q_norm } else { worst };
    if residual > tol.resid_tol * condition.max(1.0) {
        return Err(Error::ResidualTooLarge {
            residual,
            tol: tol.resid_tol * condition.max(1.0),
            context: format!("triangularization at xi = {:?}", br.xi),
        });
    }
    let ds = d_t_field(&acc)?;
    let b = (0..len).map(|j| &acc_inv[j] * &ds[j]).collect();
    Ok(ModeForm {
        xi: br.xi.clone(),
        pivots,
        s: acc,
        s_inv: acc_inv,
        lambda: br.lambda.clone(),
        n,
        b,
        residual,
        inverse_error,
        condition,
    })
}

/// Why a frequency was left out of the triangular form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Exclusion {
    BranchCrossing { pair: (usize, usize), t_index: usize },
    NoPivot { stage: usize, best: f64 },
    ResidualTooLarge { residual: f64, tol: f64 },
}

impl Exclusion {
    fn from_error(e: Error) -> std::result::Result<Exclusion, Error> {
        match e {
            Error::BranchCrossing { pair, t_index, .. } => Ok(Exclusion::BranchCrossing { pair, t_index }),
            Error::NoPivot { branch, best, .. } => Ok(Exclusion::NoPivot { stage: branch, best }),
            Error::ResidualTooLarge { residual, tol, .. } => Ok(Exclusion::ResidualTooLarge { residual, tol }),
            other => Err(other),
        }
    }

    pub fn to_error(&self, xi: &[i64]) -> Error {
        match *self {
            Exclusion::BranchCrossing { pair, t_index } => Error::BranchCrossing { xi: xi.to_vec(), pair, t_index },
            Exclusion::NoPivot { stage, best } => Error::NoPivot { xi: xi.to_vec(), branch: stage, best },
            Exclusion::ResidualTooLarge { residual, tol } => Error::ResidualTooLarge {
                residual,
                tol,
                context: format!("triangularization at xi = {xi:?}"),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcludedMode {
    pub xi: Vec<i64>,
    pub reason: Exclusion,
}

/// Outcome of the per-frequency pipeline.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum ModeOutcome {
    /// A spatial expression is undefined at this frequency.
    Undefined,
    Tracked { branches: ModeBranches, form: std::result::Result<ModeForm, Exclusion> },
}

/// Sample, track and triangularize at a single frequency.
pub fn analyze_mode(
    q: &MatrixSymbol,
    ts: &TimeSamples,
    xi: &[i64],
    order: BranchOrder,
    tol: &Tolerances,
) -> Result<ModeOutcome> {
    let Some(samples) = sample_symbol(q, xi, ts)? else {
        return Ok(ModeOutcome::Undefined);
    };
    let branches = track_mode(xi, &samples, order, tol)?;
    let form = match triangularize_mode(&samples, &branches, tol) {
        Ok(f) => Ok(f),
        Err(e) => Err(Exclusion::from_error(e)?),
    };
    Ok(ModeOutcome::Tracked { branches, form })
}

/// Triangular forms over a lattice.
#[derive(Debug, Clone)]
pub struct TriangularForm {
    pub lattice: Lattice,
    pub grid: TimeGrid,
    pub modes: Vec<ModeForm>,
    pub excluded: Vec<ExcludedMode>,
    pub undefined: Vec<SkippedMode>,
    pub max_residual: f64,
    pub max_inverse_error: f64,
}

impl TriangularForm {
    /// Fail with the first exclusion, if any.
    pub fn require_complete(&self) -> Result<()> {
        match self.excluded.first() {
            Some(e) => Err(e.reason.to_error(&e.xi)),
            None => Ok(()),
        }
    }

    pub fn mode(&self, xi: &[i64]) -> Option<&ModeForm> {
        self.modes.iter().find(|f| f.xi == xi)
    }
}

/// Triangularize every tracked frequency of `field`. Frequencies with
/// crossings, missing pivots or excessive residuals are listed, not fatal.
pub fn smooth_triangularize(field: &EigenField, q: &MatrixSymbol, tol: &Tolerances) -> Result<TriangularForm> {
    let ts = q.time_samples(field.grid.len);
    let results: Vec<Result<std::result::Result<ModeForm, ExcludedMode>>> = field
        .modes
        .par_iter()
        .map(|br| {
            let samples = q.sample_at(&br.xi, &ts)?;
            match triangularize_mode(&samples, br, tol) {
                Ok(f) => Ok(Ok(f)),
                Err(e) => Ok(Err(ExcludedMode { xi: br.xi.clone(), reason: Exclusion::from_error(e)? })),
            }
        })
        .collect();
    let mut modes = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        match r? {
            Ok(f) => modes.push(f),
            Err(x) => excluded.push(x),
        }
    }
    let max_residual = modes.iter().map(|f| f.residual).fold(0.0, f64::max);
    let max_inverse_error = modes.iter().map(|f| f.inverse_error).fold(0.0, f64::max);
    Ok(TriangularForm {
        lattice: field.lattice,
        grid: field.grid,
        modes,
        excluded,
        undefined: field.undefined.clone(),
        max_residual,
        max_inverse_error,
    })
}

/// Largest change of `B` at shared samples when the time grid is doubled,
/// relative to `1 + max |B|`. Small values mean the spectral derivative of
/// `S` is resolved.
pub fn b_grid_doubling_error(
    q: &MatrixSymbol,
    xi: &[i64],
    grid: &TimeGrid,
    order: BranchOrder,
    tol: &Tolerances,
) -> Result<Option<f64>> {
    let fine = TimeGrid::new(grid.len * 2)?;
    let coarse = analyze_mode(q, &q.time_samples(grid.len), xi, order, tol)?;
    let refined = analyze_mode(q, &q.time_samples(fine.len), xi, order, tol)?;
    let (ModeOutcome::Tracked { form: Ok(a), .. }, ModeOutcome::Tracked { form: Ok(b), .. }) = (coarse, refined) else {
        return Ok(None);
    };
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..grid.len {
        diff = diff.max(frob(&(&a.b[j] - &b.b[2 * j])));
        scale = scale.max(frob(&a.b[j]));
    }
    Ok(Some(diff / (1.0 + scale)))
}
