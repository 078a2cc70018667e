//! Periodic solutions of the scalar mode equation `D_t v + lambda(t) v = g`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::siegel_distance;
use crate::error::{Error, Result};
use crate::fourier::{coefficients, d_t, shifted_values, split_antiderivative, sup_norm};
use crate::params::Tolerances;

use super::quadrature::{CellRule, CELL_NODES};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Which closed-form representation produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    /// `v(t) = i (e^{2 pi i lambda_0} - 1)^{-1} int_0^{2pi} exp(i int_t^{t+s} lambda) g(t+s) ds`.
    Forward,
    /// `v(t) = i (1 - e^{-2 pi i lambda_0})^{-1} int_0^{2pi} exp(-i int_{t-s}^t lambda) g(t-s) ds`.
    Backward,
}

/// Solution of one scalar mode equation.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub v: Vec<Complex64>,
    pub formula: Formula,
    pub lambda0: Complex64,
    /// `sup |D_t v + lambda v - g| / sup |g|` on the grid (absolute when `g = 0`).
    pub residual: f64,
}

/// Running-exponent bounds of both formulas on the grid.
#[derive(Debug, Clone, Copy)]
pub struct ExponentBounds {
    /// `max_{t, 0 <= s <= 2pi} -Im int_t^{t+s} lambda`: log of the largest
    /// forward integrand factor.
    pub forward: f64,
    /// `max_{t, 0 <= s <= 2pi} Im int_{t-s}^t lambda`: the backward analogue.
    pub backward: f64,
}

/// `e^{2 pi i z} - 1` without cancellation near integers.
fn exp_2pi_i_minus_one(z: Complex64) -> Complex64 {
    let frac = Complex64::new(z.re - z.re.round(), z.im);
    let w = 2.0 * PI * I * frac;
    let (s, c) = w.im.sin_cos();
    let em1 = w.re.exp_m1();
    let half = (0.5 * w.im).sin();
    Complex64::new(em1 * c - 2.0 * half * half, (em1 + 1.0) * s)
}

/// Bounds of the running exponents, from the cumulative imaginary part
/// `C(tau) = Im (lambda_0 tau + Psi(tau))` on two periods.
pub fn exponent_bounds(lambda0: Complex64, psi: &[Complex64]) -> ExponentBounds {
    let n = psi.len();
    let h = 2.0 * PI / n as f64;
    let c: Vec<f64> = (0..=2 * n).map(|k| lambda0.im * k as f64 * h + psi[k % n].im).collect();
    // Sliding minimum of C over the windows [a, a + n].
    let mut window_min = vec![0.0; n + 1];
    let mut dq: VecDeque<usize> = VecDeque::new();
    for k in 0..=2 * n {
        while dq.back().is_some_and(|&b| c[b] >= c[k]) {
            dq.pop_back();
        }
        dq.push_back(k);
        if k >= n {
            let a = k - n;
            while dq.front().is_some_and(|&f| f < a) {
                dq.pop_front();
            }
            window_min[a] = c[dq[0]];
        }
    }
    let forward = (0..=n).map(|a| c[a] - window_min[a]).fold(f64::NEG_INFINITY, f64::max);
    let backward = (0..=n).map(|a| c[a + n] - window_min[a]).fold(f64::NEG_INFINITY, f64::max);
    ExponentBounds { forward, backward }
}

/// Solve `D_t v + lambda v = g` for the periodic `v`. The integral over
/// each grid cell is done by a Filon-type rule: the factor
/// `e^{i lambda_0 s}` is integrated exactly against the degree-15
/// interpolant of the smooth periodic part `e^{i Psi} g`, sampled off-grid
/// through its trigonometric interpolant. The forward formula is used when
/// its integrand stays below `e^{exp_cap}`, otherwise the backward one.
pub fn solve_periodic_mode(lambda: &[Complex64], g: &[Complex64], tol: &Tolerances) -> Result<PeriodicSolution> {
    let (lambda0, psi) = prepare(lambda, g)?;
    check_resonance(lambda0, tol)?;
    let bounds = exponent_bounds(lambda0, &psi);
    let formula = if bounds.forward <= tol.exp_cap { Formula::Forward } else { Formula::Backward };
    solve_with(lambda, g, lambda0, &psi, formula)
}

/// Solve with a prescribed formula, regardless of admissibility.
pub fn solve_periodic_mode_with(
    lambda: &[Complex64],
    g: &[Complex64],
    formula: Formula,
    tol: &Tolerances,
) -> Result<PeriodicSolution> {
    let (lambda0, psi) = prepare(lambda, g)?;
    check_resonance(lambda0, tol)?;
    solve_with(lambda, g, lambda0, &psi, formula)
}

fn prepare(lambda: &[Complex64], g: &[Complex64]) -> Result<(Complex64, Vec<Complex64>)> {
    if lambda.len() != g.len() {
        return Err(Error::ShapeMismatch(format!("lambda has {} samples, g has {}", lambda.len(), g.len())));
    }
    let n = lambda.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NonPowerOfTwo(n));
    }
    split_antiderivative(lambda)
}

/// Check the non-resonance precondition for `lambda_0`.
pub fn check_resonance(lambda0: Complex64, tol: &Tolerances) -> Result<()> {
    let d = siegel_distance(lambda0);
    if d.is_nan() || d <= tol.res_tol {
        return Err(Error::Resonant { distance: d });
    }
    Ok(())
}

fn solve_with(
    lambda: &[Complex64],
    g: &[Complex64],
    lambda0: Complex64,
    psi: &[Complex64],
    formula: Formula,
) -> Result<PeriodicSolution> {
    let n = g.len();
    let h = 2.0 * PI / n as f64;
    // The backward formula is the forward one for the reflected variable.
    let (sign, prefactor) = match formula {
        Formula::Forward => (1.0, I / exp_2pi_i_minus_one(lambda0)),
        Formula::Backward => (-1.0, -I / exp_2pi_i_minus_one(-lambda0)),
    };
    let f: Vec<Complex64> = g.iter().zip(psi).map(|(g, p)| (I * p).exp() * g).collect();
    let fc = coefficients(&f)?;
    let rule = CellRule::shared();
    let w = rule.weights(sign * lambda0 * h);
    // K_k = int_0^h e^{+-i lambda_0 u} F(t_k +- u) du.
    let mut cells = vec![Complex64::new(0.0, 0.0); n];
    for q in 0..CELL_NODES {
        let shifted = shifted_values(&fc, sign * rule.nodes[q] * h)?;
        let wq = w[q] * h;
        for (c, s) in cells.iter_mut().zip(shifted) {
            *c += wq * s;
        }
    }
    let ratio = (sign * I * lambda0 * h).exp();
    let mut powers = Vec::with_capacity(n);
    let mut p = Complex64::new(1.0, 0.0);
    for l in 0..n {
        powers.push(p);
        p = if (l + 1) % 32 == 0 { (sign * I * lambda0 * h * (l + 1) as f64).exp() } else { p * ratio };
    }
    let v: Vec<Complex64> = (0..n)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, pw) in powers.iter().enumerate() {
                let k = if sign > 0.0 { (j + l) % n } else { (j + n - l) % n };
                acc += pw * cells[k];
            }
            prefactor * (-I * psi[j]).exp() * acc
        })
        .collect();
    let residual = mode_residual(lambda, &v, g)?;
    Ok(PeriodicSolution { v, formula, lambda0, residual })
}

/// `sup |D_t v + lambda v - g|`, divided by `sup |g|` unless `g = 0`.
pub fn mode_residual(lambda: &[Complex64], v: &[Complex64], g: &[Complex64]) -> Result<f64> {
    let dv = d_t(v)?;
    let r: Vec<Complex64> = (0..v.len()).map(|j| dv[j] + lambda[j] * v[j] - g[j]).collect();
    let scale = sup_norm(g);
    Ok(sup_norm(&r) / if scale > 0.0 { scale } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_half_gives_two() {
        let tol = Tolerances::default();
        let sol = solve_periodic_mode(&[c(0.5, 0.0); 32], &[c(1.0, 0.0); 32], &tol).unwrap();
        for z in &sol.v {
            assert!((z - c(2.0, 0.0)).norm() < 1e-13, "{z}");
        }
        assert_eq!(sol.formula, Formula::Forward);
    }

    #[test]
    fn integer_average_is_resonant() {
        let tol = Tolerances::default();
        let lam: Vec<Complex64> = grid(32).iter().map(|t| c(3.0 + t.sin(), 0.0)).collect();
        let err = solve_periodic_mode(&lam, &[c(1.0, 0.0); 32], &tol).unwrap_err();
        assert!(matches!(err, Error::Resonant { .. }));
        let (l0, _) = split_antiderivative(&lam).unwrap();
        assert!(check_resonance(l0, &tol).is_err());
    }

    #[test]
    fn dissipative_coefficient_has_small_residual() {
        let tol = Tolerances::default();
        let ts = grid(64);
        let lam: Vec<Complex64> = ts.iter().map(|t| c(0.5, 1.0 - t.cos())).collect();
        let g: Vec<Complex64> = ts.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        let sol = solve_periodic_mode(&lam, &g, &tol).unwrap();
        assert!(sol.residual < 1e-8, "{}", sol.residual);
    }

    #[test]
    fn forward_and_backward_agree() {
        let tol = Tolerances::default();
        let ts = grid(64);
        let lam: Vec<Complex64> = ts.iter().map(|t| c(0.3 + 0.7 * t.cos(), 0.2 * (2.0 * t).sin())).collect();
        let g: Vec<Complex64> = ts.iter().map(|&t| c((3.0 * t).cos(), t.sin())).collect();
        let a = solve_periodic_mode_with(&lam, &g, Formula::Forward, &tol).unwrap();
        let b = solve_periodic_mode_with(&lam, &g, Formula::Backward, &tol).unwrap();
        let diff = a.v.iter().zip(&b.v).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        assert!(a.residual < 1e-9 && b.residual < 1e-9);
    }

    #[test]
    fn large_negative_imaginary_average_uses_backward() {
        let tol = Tolerances::default();
        let ts = grid(64);
        let lam: Vec<Complex64> = ts.iter().map(|t| c(0.25 + t.sin(), -8.0)).collect();
        let g: Vec<Complex64> = ts.iter().map(|&t| c(1.0, t.cos())).collect();
        let sol = solve_periodic_mode(&lam, &g, &tol).unwrap();
        assert_eq!(sol.formula, Formula::Backward);
        assert!(sol.residual < 1e-9, "{}", sol.residual);
    }

    #[test]
    fn bandlimited_product_matches_the_spectral_division() {
        // For lambda constant, v_k = g_k / (k + lambda).
        let tol = Tolerances::default();
        let ts = grid(32);
        let lam0 = c(17.3, 0.4);
        let g: Vec<Complex64> = ts.iter().map(|&t| c((2.0 * t).cos(), 0.0) + Complex64::from_polar(0.5, -5.0 * t)).collect();
        let sol = solve_periodic_mode(&vec![lam0; 32], &g, &tol).unwrap();
        for (j, &t) in ts.iter().enumerate() {
            let exact = (Complex64::from_polar(0.5, 2.0 * t) / (2.0 + lam0))
                + (Complex64::from_polar(0.5, -2.0 * t) / (-2.0 + lam0))
                + (Complex64::from_polar(0.5, -5.0 * t) / (-5.0 + lam0));
            assert!((sol.v[j] - exact).norm() < 1e-13, "{j}");
        }
    }

    #[test]
    fn exponent_bounds_of_a_constant() {
        let b = exponent_bounds(c(0.5, 0.25), &[c(0.0, 0.0); 8]);
        assert!(b.forward.abs() < 1e-15);
        assert!((b.backward - 0.5 * PI).abs() < 1e-12);
    }
}
