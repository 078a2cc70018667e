//! Distances of symbol values to the resonant set.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::symbol::Lattice;

/// `min_{tau in Z} |tau + kappa| = hypot(dist(Re kappa, Z), Im kappa)`.
pub fn min_tau_distance(kappa: Complex64) -> f64 {
    (kappa.re - kappa.re.round()).abs().hypot(kappa.im)
}

/// `|e^{x + iy} - 1|` without cancellation near zero.
fn abs_expm1(x: f64, y: f64) -> f64 {
    let em = x.exp_m1();
    let half = (0.5 * y).sin();
    let re = em * y.cos() - 2.0 * half * half;
    let im = (em + 1.0) * y.sin();
    re.hypot(im)
}

/// `min(|1 - e^{2 pi i lambda0}|, |1 - e^{-2 pi i lambda0}|)`.
pub fn siegel_distance(lambda0: Complex64) -> f64 {
    let y = TAU * (lambda0.re - lambda0.re.round());
    let x = -TAU * lambda0.im;
    let a = abs_expm1(x, y);
    let b = abs_expm1(-x, -y);
    if a.is_nan() {
        b
    } else {
        a.min(b)
    }
}

/// Whether `lambda0` lies within `res_tol` of an integer.
pub fn is_resonant(lambda0: Complex64, res_tol: f64) -> bool {
    min_tau_distance(lambda0) <= res_tol && lambda0.im.abs() <= res_tol
}

/// Lattice points where the averaged eigenvalue is an integer within
/// `res_tol`, in lexicographic order. Points where `lambda0` is undefined
/// (`None`) are skipped.
pub fn resonance_set<F>(lambda0: F, lattice: &Lattice, res_tol: f64) -> Vec<Vec<i64>>
where
    F: Fn(&[i64]) -> Option<Complex64>,
{
    let mut out = Vec::new();
    lattice.for_each(|xi| {
        if let Some(l) = lambda0(xi) {
            if is_resonant(l, res_tol) {
                out.push(xi.to_vec());
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn documented_distances() {
        assert_eq!(min_tau_distance(c(0.5, 0.0)), 0.5);
        assert_eq!(min_tau_distance(c(3.0, 0.0)), 0.0);
        assert!((min_tau_distance(c(2.0, 0.3)) - 0.3).abs() < 1e-15);
        assert!((siegel_distance(c(0.5, 0.0)) - 2.0).abs() < 1e-15);
        assert_eq!(siegel_distance(c(7.0, 0.0)), 0.0);
        let expected = 1.0 - (-TAU).exp();
        assert!((siegel_distance(c(0.0, 1.0)) - expected).abs() < 1e-15);
        assert!((siegel_distance(c(0.0, 1.0)) - 0.998132).abs() < 1e-6);
    }

    #[test]
    fn small_distances_keep_relative_accuracy() {
        let d = siegel_distance(c(5.0 + 1e-12, 0.0));
        assert!((d / (TAU * 1e-12) - 1.0).abs() < 1e-3);
        assert!(siegel_distance(c(0.25, 400.0)).is_finite());
    }

    #[test]
    fn documented_resonance_sets() {
        let l = Lattice::new(1, 10).unwrap();
        let half = resonance_set(|xi| Some(c(xi[0] as f64 / 2.0, 0.0)), &l, 1e-9);
        assert_eq!(half, (-5..=5).map(|k| vec![2 * k]).collect::<Vec<_>>());
        let root2 = resonance_set(|xi| Some(c(2f64.sqrt() * xi[0] as f64, 0.0)), &l, 1e-9);
        assert_eq!(root2, vec![vec![0]]);
        // tau - |xi| vanishes at tau = |xi| for every xi.
        let wave = resonance_set(|xi| Some(c(-(xi[0].abs() as f64), 0.0)), &l, 1e-9);
        assert_eq!(wave.len(), 21);
    }
}
