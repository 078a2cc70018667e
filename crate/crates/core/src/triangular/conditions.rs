//! Finite-lattice evidence for the strong-triangularizability conditions:
//! polynomial bounds on the frame, rapid decay of the twist, bounds on the
//! imaginary parts of the eigenvalues, and eigenvector growth.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fourier::{derivative_series, periodic_quadrature};
use crate::linalg::CMat;
use crate::params::Tolerances;
use crate::report::ext_f64;
use crate::symbol::lattice::{norm, Lattice};
use crate::symbol::order::{estimate_order_from_stats, AnnulusStats, OrderFit};
use crate::triangular::branches::{EigenField, ModeBranches};
use crate::triangular::smooth::{choose_pivot, ModeForm, TriangularForm, SNAP_TOL};

/// `sup_t |d^alpha F(t)|_F` for `alpha = 0..=alpha_max`.
pub fn field_sups(f: &[CMat], alpha_max: u32) -> Result<Vec<f64>> {
    let (r, c) = f[0].shape();
    let len = f.len();
    let mut acc = vec![vec![0.0f64; len]; alpha_max as usize + 1];
    for i in 0..r {
        for j in 0..c {
            let col: Vec<Complex64> = f.iter().map(|a| a[(i, j)]).collect();
            for (alpha, d) in derivative_series(&col, alpha_max)?.iter().enumerate() {
                for (t, z) in d.iter().enumerate() {
                    acc[alpha][t] += z.norm_sqr();
                }
            }
        }
    }
    Ok(acc.iter().map(|a| a.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt()).collect())
}

fn vector_sups(v: &[Vec<Complex64>], alpha_max: u32) -> Result<Vec<f64>> {
    let field: Vec<CMat> = v.iter().map(|w| CMat::from_column_slice(w.len(), 1, w)).collect();
    field_sups(&field, alpha_max)
}

/// Eigenvector samples scaled so the pivot component is one, snapped to a
/// constant when the spread is at rounding level. `None` without a pivot.
fn normalized_vectors(h: &[Vec<Complex64>], pivot_tol: f64) -> Option<Vec<Vec<Complex64>>> {
    let (p, best) = choose_pivot(h);
    if best < pivot_tol {
        return None;
    }
    let mut v: Vec<Vec<Complex64>> = h.iter().map(|w| w.iter().map(|z| z / w[p]).collect()).collect();
    let v0 = v[0].clone();
    let scale = v0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let spread = v
        .iter()
        .map(|w| w.iter().zip(&v0).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if spread <= SNAP_TOL * scale {
        v.iter_mut().for_each(|w| w.clone_from(&v0));
    }
    Some(v)
}

/// Streaming collector of the per-frequency quantities behind a
/// [`ConditionReport`]. Partial collectors from parallel workers merge.
#[derive(Debug, Clone)]
pub struct ConditionAccumulator {
    lattice: Lattice,
    alpha_max: u32,
    m: usize,
    r_exc: f64,
    eig_tol: f64,
    pivot_tol: f64,
    q_norm_max: f64,
    modes: u64,
    s: Vec<AnnulusStats>,
    s_inv: Vec<AnnulusStats>,
    b: Vec<AnnulusStats>,
    theta: Vec<AnnulusStats>,
    upper: Vec<AnnulusStats>,
    sign_changes: Vec<u64>,
    sign_witness: Vec<Option<Vec<i64>>>,
    growth: Vec<Vec<AnnulusStats>>,
    average: Vec<AnnulusStats>,
    eigvec: Vec<AnnulusStats>,
    eigvec_missing: Vec<u64>,
    eigvec_deriv: Vec<Vec<AnnulusStats>>,
}

impl ConditionAccumulator {
    pub fn new(lattice: Lattice, m: usize, alpha_max: u32, tol: &Tolerances) -> Self {
        let st = || AnnulusStats::new(lattice);
        let per_alpha = || (0..=alpha_max).map(|_| st()).collect::<Vec<_>>();
        ConditionAccumulator {
            lattice,
            alpha_max,
            m,
            r_exc: tol.r_exc,
            eig_tol: tol.eig_tol,
            pivot_tol: tol.pivot_tol,
            q_norm_max: 0.0,
            modes: 0,
            s: per_alpha(),
            s_inv: per_alpha(),
            b: per_alpha(),
            theta: (0..m).map(|_| st()).collect(),
            upper: (0..m).map(|_| st()).collect(),
            sign_changes: vec![0; m],
            sign_witness: vec![None; m],
            growth: (0..m).map(|_| per_alpha()).collect(),
            average: (0..m).map(|_| st()).collect(),
            eigvec: (0..m).map(|_| st()).collect(),
            eigvec_missing: vec![0; m],
            eigvec_deriv: (0..m).map(|_| (0..alpha_max).map(|_| st()).collect()).collect(),
        }
    }

    pub fn push(&mut self, br: &ModeBranches, form: &ModeForm) -> Result<()> {
        let xi = br.xi.as_slice();
        self.modes += 1;
        self.q_norm_max = self.q_norm_max.max(br.q_norm);
        for (stats, sups) in [
            (&mut self.s, field_sups(&form.s, self.alpha_max)?),
            (&mut self.s_inv, field_sups(&form.s_inv, self.alpha_max)?),
            (&mut self.b, field_sups(&form.b, self.alpha_max)?),
        ] {
            for (st, v) in stats.iter_mut().zip(sups) {
                st.push(xi, v);
            }
        }
        let im_tol = self.eig_tol * (1.0 + br.q_norm);
        for k in 0..self.m {
            let lam = &br.lambda[k];
            let lo = lam.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
            let hi = lam.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
            self.theta[k].push(xi, -lo);
            self.upper[k].push(xi, hi);
            if norm(xi) > self.r_exc && lo < -im_tol && hi > im_tol {
                self.sign_changes[k] += 1;
                if self.sign_witness[k].is_none() {
                    self.sign_witness[k] = Some(xi.to_vec());
                }
            }
            for (st, v) in self.growth[k].iter_mut().zip(derivative_series(lam, self.alpha_max)?) {
                st.push(xi, v.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            self.average[k].push(xi, periodic_quadrature(lam).norm());
            match normalized_vectors(&br.vectors[k], self.pivot_tol) {
                Some(v) => {
                    let sups = vector_sups(&v, self.alpha_max)?;
                    self.eigvec[k].push(xi, sups[0]);
                    for (st, s) in self.eigvec_deriv[k].iter_mut().zip(&sups[1..]) {
                        st.push(xi, *s);
                    }
                }
                None => self.eigvec_missing[k] += 1,
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConditionAccumulator) {
        self.modes += other.modes;
        self.q_norm_max = self.q_norm_max.max(other.q_norm_max);
        let pairs = |a: &mut Vec<AnnulusStats>, b: &Vec<AnnulusStats>| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        };
        pairs(&mut self.s, &other.s);
        pairs(&mut self.s_inv, &other.s_inv);
        pairs(&mut self.b, &other.b);
        pairs(&mut self.theta, &other.theta);
        pairs(&mut self.upper, &other.upper);
        pairs(&mut self.average, &other.average);
        pairs(&mut self.eigvec, &other.eigvec);
        for k in 0..self.m {
            pairs(&mut self.growth[k], &other.growth[k]);
            pairs(&mut self.eigvec_deriv[k], &other.eigvec_deriv[k]);
            self.sign_changes[k] += other.sign_changes[k];
            self.eigvec_missing[k] += other.eigvec_missing[k];
            if self.sign_witness[k].is_none() {
                self.sign_witness[k].clone_from(&other.sign_witness[k]);
            }
        }
    }

    pub fn finish(&self, tol: &Tolerances) -> Result<ConditionReport> {
        let fit_all = |v: &Vec<AnnulusStats>| v.iter().map(|s| estimate_order_from_stats(s, tol)).collect::<Result<Vec<_>>>();
        let s_growth = fit_all(&self.s)?;
        let s_inv_growth = fit_all(&self.s_inv)?;
        let b_decay = fit_all(&self.b)?;
        let polynomial = |f: &OrderFit| !f.grows_superpolynomially(tol.n_probe) && f.verdict != crate::symbol::OrderVerdict::Irregular;
        let s_polynomial = s_growth.iter().chain(&s_inv_growth).all(polynomial);
        let gamma_hat = s_growth
            .iter()
            .chain(&s_inv_growth)
            .filter(|f| !f.is_rapid_decay())
            .filter_map(|f| f.exponent)
            .fold(0.0, f64::max);
        let b_rapid_decay = b_decay.iter().all(|f| f.is_rapid_decay());
        let floor = self.eig_tol * (1.0 + self.q_norm_max);

        let mut branches = Vec::with_capacity(self.m);
        for k in 0..self.m {
            let theta_by_annulus: Vec<f64> = self.theta[k].annuli().iter().map(|a| a.max).collect();
            let upper_by_annulus: Vec<f64> = self.upper[k].annuli().iter().map(|a| a.max).collect();
            let growth = fit_all(&self.growth[k])?;
            let eig = estimate_order_from_stats(&self.eigvec[k], tol).ok();
            let eig_min = eig.as_ref().and_then(|_| {
                crate::symbol::order::PowerFit::from_points(&self.eigvec[k].min_points()).map(|f| f.slope)
            });
            let eigvec_deriv = fit_all(&self.eigvec_deriv[k]).unwrap_or_default();
            branches.push(BranchConditions {
                branch: k,
                theta_hat: theta_by_annulus.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                imag_lower_bounded: stabilizes(&theta_by_annulus, floor),
                theta_by_annulus,
                upper_hat: upper_by_annulus.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                imag_upper_bounded: stabilizes(&upper_by_annulus, floor),
                upper_by_annulus,
                sign_changes: self.sign_changes[k],
                sign_change_witness: self.sign_witness[k].clone(),
                mu_hat: growth.iter().map(|f| f.exponent).collect(),
                polynomial_growth: growth.iter().all(polynomial),
                growth,
                average_growth: estimate_order_from_stats(&self.average[k], tol)?,
                eigvec_kappa: eig_min,
                eigvec_delta: eig.as_ref().and_then(|f| f.exponent),
                eigvec_bounded: self.eigvec_missing[k] == 0 && eig.as_ref().map(polynomial).unwrap_or(false),
                eigvec_derivatives_decay: self.eigvec_missing[k] == 0
                    && eigvec_deriv.len() == self.alpha_max as usize
                    && eigvec_deriv.iter().all(|f| f.is_rapid_decay()),
            });
        }
        let imag_lower_bound = branches.iter().all(|b| b.imag_lower_bounded);
        let imag_upper_bound = branches.iter().all(|b| b.imag_upper_bounded);
        let sign_condition = branches.iter().all(|b| b.sign_changes == 0);
        Ok(ConditionReport {
            alpha_max: self.alpha_max,
            modes: self.modes,
            complete_annuli: self.lattice.complete_annuli(),
            gamma_hat,
            s_polynomial,
            s_growth,
            s_inv_growth,
            b_rapid_decay,
            b_decay,
            imag_lower_bound,
            imag_upper_bound,
            sign_condition,
            branches,
            notes: vec![
                "finite-lattice evidence only; sup over t is taken on the sampled grid".into(),
                "smoothness in t is checked through spectral derivatives on the grid, not jointly in (t, xi)".into(),
            ],
        })
    }
}

/// A per-annulus series (clamped at zero) stays bounded when its last two
/// annuli do not exceed 1.5 times the earlier maximum plus `floor`.
fn stabilizes(series: &[f64], floor: f64) -> bool {
    if series.len() < 3 {
        return false;
    }
    let clamp = |v: &f64| v.max(0.0);
    let split = series.len() - 2;
    let early = series[..split].iter().map(clamp).fold(0.0, f64::max);
    let late = series[split..].iter().map(clamp).fold(0.0, f64::max);
    late <= 1.5 * early + floor
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchConditions {
    pub branch: usize,
    /// `max` over the lattice of `-min_t Im lambda_k`.
    #[serde(with = "ext_f64")]
    pub theta_hat: f64,
    #[serde(with = "ext_f64::vec")]
    pub theta_by_annulus: Vec<f64>,
    /// `Im lambda_k >= -theta` with `theta` stable across annuli.
    pub imag_lower_bounded: bool,
    /// `max` over the lattice of `max_t Im lambda_k`.
    #[serde(with = "ext_f64")]
    pub upper_hat: f64,
    #[serde(with = "ext_f64::vec")]
    pub upper_by_annulus: Vec<f64>,
    /// Mirrored condition `Im lambda_k <= theta`.
    pub imag_upper_bounded: bool,
    /// Frequencies beyond the exceptional radius where `Im lambda_k(., xi)`
    /// takes both signs.
    pub sign_changes: u64,
    pub sign_change_witness: Option<Vec<i64>>,
    /// Fitted exponents of `sup_t |d^alpha lambda_k|`.
    pub mu_hat: Vec<Option<f64>>,
    pub polynomial_growth: bool,
    pub growth: Vec<OrderFit>,
    /// Fit of `|lambda_{0,k}(xi)|`, the growth of the averaged eigenvalue.
    pub average_growth: OrderFit,
    /// Lower and upper growth exponents of `sup_t |h_k|` with the pivot
    /// component scaled to one.
    pub eigvec_kappa: Option<f64>,
    pub eigvec_delta: Option<f64>,
    pub eigvec_bounded: bool,
    pub eigvec_derivatives_decay: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub alpha_max: u32,
    pub modes: u64,
    pub complete_annuli: u32,
    /// Largest fitted growth exponent of `S`, `S^{-1}` and their derivatives.
    pub gamma_hat: f64,
    /// Polynomial bounds on `S`, `S^{-1}` and their `t`-derivatives.
    pub s_polynomial: bool,
    pub s_growth: Vec<OrderFit>,
    pub s_inv_growth: Vec<OrderFit>,
    /// Rapid decay of `B` and its `t`-derivatives.
    pub b_rapid_decay: bool,
    pub b_decay: Vec<OrderFit>,
    /// Imaginary-part lower bound on every branch.
    pub imag_lower_bound: bool,
    /// Imaginary-part upper bound on every branch.
    pub imag_upper_bound: bool,
    /// No branch changes the sign of its imaginary part in `t`.
    pub sign_condition: bool,
    pub branches: Vec<BranchConditions>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    /// Polynomial frame bounds and a rapidly decaying twist.
    pub fn strongly_triangularizable(&self) -> bool {
        self.s_polynomial && self.b_rapid_decay
    }
}

/// Fit every condition over the accepted frequencies of `form`.
pub fn verify_strong_conditions(
    form: &TriangularForm,
    field: &EigenField,
    alpha_max: u32,
    tol: &Tolerances,
) -> Result<ConditionReport> {
    let m = form.modes.first().map(|f| f.m()).or_else(|| field.modes.first().map(|b| b.m())).unwrap_or(1);
    let by_xi: HashMap<&[i64], &ModeBranches> = field.modes.iter().map(|b| (b.xi.as_slice(), b)).collect();
    let mut acc = ConditionAccumulator::new(form.lattice, m, alpha_max, tol);
    for f in &form.modes {
        if let Some(br) = by_xi.get(f.xi.as_slice()) {
            acc.push(br, f)?;
        }
    }
    acc.finish(tol)
}
