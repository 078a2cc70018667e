//! Diophantine fits: power-law lower bounds of a distance function from its
//! per-annulus minima, with exact zeros kept aside as resonance witnesses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Tolerances;
use crate::report::ext_f64;
use crate::symbol::lattice::{norm, norm_sq, Lattice};
use crate::symbol::order::{AnnulusExtremes, AnnulusStats, PowerFit, MIN_ANNULI};

use super::verdict::Verdict;

/// Most witnesses listed in a report; the count is always exact.
pub const WITNESS_CAP: usize = 4096;

/// Streaming per-annulus minima of a distance plus its witnesses.
#[derive(Debug, Clone)]
pub struct Sweep {
    stats: AnnulusStats,
    r_exc: f64,
    witnesses: Vec<Vec<i64>>,
    witness_count: u64,
    outer_witness_count: u64,
    samples: u64,
}

fn witness_key(xi: &[i64]) -> (u128, Vec<i64>) {
    (norm_sq(xi), xi.to_vec())
}

fn prune(list: &mut Vec<Vec<i64>>) {
    list.sort_by_cached_key(|w| witness_key(w));
    list.dedup();
    list.truncate(WITNESS_CAP);
}

impl Sweep {
    pub fn new(lattice: Lattice, r_exc: f64) -> Self {
        Sweep {
            stats: AnnulusStats::new(lattice),
            r_exc,
            witnesses: Vec::new(),
            witness_count: 0,
            outer_witness_count: 0,
            samples: 0,
        }
    }

    /// Record `value >= 0` at `xi`, or a witness of resonance.
    pub fn push(&mut self, xi: &[i64], value: f64, witness: bool) {
        self.samples += 1;
        if witness {
            self.witness_count += 1;
            if norm(xi) > self.r_exc {
                self.outer_witness_count += 1;
            }
            self.witnesses.push(xi.to_vec());
            if self.witnesses.len() >= 2 * WITNESS_CAP {
                prune(&mut self.witnesses);
            }
        } else {
            self.stats.push(xi, value.max(f64::MIN_POSITIVE));
        }
    }

    pub fn merge(&mut self, other: Sweep) {
        self.stats.merge(&other.stats);
        self.samples += other.samples;
        self.witness_count += other.witness_count;
        self.outer_witness_count += other.outer_witness_count;
        self.witnesses.extend(other.witnesses);
        if self.witnesses.len() >= 2 * WITNESS_CAP {
            prune(&mut self.witnesses);
        }
    }

    pub fn witness_count(&self) -> u64 {
        self.witness_count
    }

    /// Smallest-norm witnesses, at most [`WITNESS_CAP`].
    pub fn witnesses(&self) -> Vec<Vec<i64>> {
        let mut w = self.witnesses.clone();
        prune(&mut w);
        w
    }

    pub fn annuli(&self) -> Vec<AnnulusExtremes> {
        self.stats.annuli()
    }

    /// Fit the minima and classify.
    pub fn fit(&self, tol: &Tolerances) -> Result<DiophantineFit> {
        let annuli = self.stats.annuli();
        let resonant = self.outer_witness_count > 0;
        if annuli.len() < MIN_ANNULI && !resonant {
            return Err(Error::InsufficientData { needed: MIN_ANNULI, found: annuli.len() });
        }
        let fit = PowerFit::from_points(&self.stats.min_points());
        let mut note = None;
        let verdict = if resonant {
            Verdict::NonGhResonant
        } else {
            match &fit {
                None => {
                    note = Some("fewer than two annuli with a positive minimum".to_string());
                    Verdict::Inconclusive
                }
                Some(f) => {
                    let w = &f.window_slopes;
                    let collapsing = w.len() >= 2 && {
                        let (last, prev) = (w[w.len() - 1], w[w.len() - 2]);
                        last < -tol.m_cap && last <= prev
                    };
                    if collapsing {
                        Verdict::NonGhSuperpolynomial
                    } else if f.slope >= -tol.m_cap && f.residual <= tol.fit_resid_tol {
                        Verdict::GhConsistent
                    } else {
                        note = Some(format!(
                            "slope {:.3} with RMS residual {:.3} is neither polynomial nor collapsing",
                            f.slope, f.residual
                        ));
                        Verdict::Inconclusive
                    }
                }
            }
        };
        // Adding 0.0 turns a negative zero into a positive one.
        let exponent = fit.as_ref().map(|f| (-f.slope).max(0.0) + 0.0);
        let worst_annulus = annuli.iter().min_by(|a, b| a.min.total_cmp(&b.min)).cloned();
        Ok(DiophantineFit {
            verdict,
            exponent,
            fit,
            worst_annulus,
            annuli,
            witnesses: self.witnesses(),
            witness_count: self.witness_count,
            witnesses_beyond_exceptional_ball: self.outer_witness_count,
            samples: self.samples,
            note,
        })
    }
}

/// Estimated lower bound `d(xi) >= C |xi|^{-M}` and its classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineFit {
    pub verdict: Verdict,
    /// Fitted exponent `M` (zero when the minima do not decay).
    #[serde(with = "ext_f64::opt")]
    pub exponent: Option<f64>,
    pub fit: Option<PowerFit>,
    /// Annulus with the smallest minimum.
    pub worst_annulus: Option<AnnulusExtremes>,
    pub annuli: Vec<AnnulusExtremes>,
    /// Smallest-norm points where the distance vanishes (within tolerance).
    pub witnesses: Vec<Vec<i64>>,
    pub witness_count: u64,
    pub witnesses_beyond_exceptional_ball: u64,
    pub samples: u64,
    pub note: Option<String>,
}

/// Fit a distance `d(xi) >= 0` given pointwise. Exact zeros are witnesses.
pub fn diophantine_fit<'a, I>(values: I, lattice: &Lattice, tol: &Tolerances) -> Result<DiophantineFit>
where
    I: IntoIterator<Item = (&'a [i64], f64)>,
{
    let mut sweep = Sweep::new(*lattice, tol.r_exc);
    for (xi, d) in values {
        sweep.push(xi, d, d == 0.0);
    }
    sweep.fit(tol)
}

/// Parallel sweep of a distance over the whole lattice. `d` returns
/// `None` where the distance is undefined; values `<= zero_tol` are witnesses.
pub fn sweep_distance<F>(lattice: &Lattice, zero_tol: f64, tol: &Tolerances, d: F) -> Result<Sweep>
where
    F: Fn(&[i64]) -> Option<f64> + Sync + Send,
{
    lattice.try_par_fold(
        || Sweep::new(*lattice, tol.r_exc),
        |s, xi| {
            if let Some(v) = d(xi) {
                s.push(xi, v, v <= zero_tol);
            }
            Ok(())
        },
        |a, b| a.merge(b),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::distance::min_tau_distance;
    use num_complex::Complex64;

    fn tau_fit(b0: f64, radius: u64) -> DiophantineFit {
        let l = Lattice::new(1, radius).unwrap();
        let tol = Tolerances::default();
        sweep_distance(&l, 0.0, &tol, |xi| Some(min_tau_distance(Complex64::new(b0 * xi[0] as f64, 0.0))))
            .unwrap()
            .fit(&tol)
            .unwrap()
    }

    #[test]
    fn constant_distance_has_exponent_zero() {
        let l = Lattice::new(1, 256).unwrap();
        let pts = l.points();
        let f = diophantine_fit(pts.iter().map(|p| (p.as_slice(), 1.0)), &l, &Tolerances::default()).unwrap();
        assert_eq!(f.exponent, Some(0.0));
        assert_eq!(f.verdict, Verdict::GhConsistent);
    }

    #[test]
    fn quadratic_irrational_has_exponent_one() {
        let f = tau_fit(2f64.sqrt(), 1 << 14);
        let m = f.exponent.unwrap();
        assert!((0.8..=1.2).contains(&m), "M = {m}");
        assert_eq!(f.verdict, Verdict::GhConsistent);
        // Only the origin is resonant.
        assert_eq!(f.witnesses, vec![vec![0]]);
    }

    #[test]
    fn exponential_decay_collapses() {
        let l = Lattice::new(1, 256).unwrap();
        let pts = l.points();
        let f = diophantine_fit(
            pts.iter().map(|p| (p.as_slice(), (-(p[0].abs() as f64)).exp())),
            &l,
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(f.verdict, Verdict::NonGhSuperpolynomial);
    }

    #[test]
    fn too_few_annuli_is_an_error() {
        let l = Lattice::new(1, 6).unwrap();
        let pts = l.points();
        let r = diophantine_fit(pts.iter().map(|p| (p.as_slice(), 1.0)), &l, &Tolerances::default());
        assert!(matches!(r, Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn witnesses_outside_the_ball_decide() {
        let f = tau_fit(0.5, 64);
        assert_eq!(f.verdict, Verdict::NonGhResonant);
        assert_eq!(f.witness_count, 65);
        assert_eq!(f.witnesses[0], vec![0]);
    }
}
