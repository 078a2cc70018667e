//! Growth and decay orders of lattice functions from dyadic-annulus extrema.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Tolerances;
use crate::report::ext_f64;
use crate::symbol::lattice::{annulus_of_norm_sq, norm_sq, Lattice};

/// Fewest complete annuli a fit is attempted on.
pub const MIN_ANNULI: usize = 4;
/// Number of consecutive annuli in a windowed slope.
pub const WINDOW: usize = 3;

/// Extremes of a lattice function over one dyadic annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusExtremes {
    pub k: u32,
    pub count: u64,
    #[serde(with = "ext_f64")]
    pub max: f64,
    pub max_at: Vec<i64>,
    #[serde(with = "ext_f64")]
    pub min: f64,
    pub min_at: Vec<i64>,
}

/// Streaming per-annulus maxima and minima. Only complete annuli are kept.
#[derive(Debug, Clone)]
pub struct AnnulusStats {
    lattice: Lattice,
    annuli: Vec<Option<AnnulusExtremes>>,
    max_norm_sq: Vec<u128>,
    min_norm_sq: Vec<u128>,
}

impl AnnulusStats {
    pub fn new(lattice: Lattice) -> Self {
        let n = lattice.complete_annuli() as usize;
        AnnulusStats {
            lattice,
            annuli: vec![None; n],
            max_norm_sq: vec![0; n],
            min_norm_sq: vec![0; n],
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Record `value >= 0` at `xi`. Points outside complete annuli are ignored.
    pub fn push(&mut self, xi: &[i64], value: f64) {
        let s = norm_sq(xi);
        let Some(k) = annulus_of_norm_sq(s) else { return };
        let k = k as usize;
        if k >= self.annuli.len() {
            return;
        }
        match &mut self.annuli[k] {
            None => {
                self.annuli[k] = Some(AnnulusExtremes {
                    k: k as u32,
                    count: 1,
                    max: value,
                    max_at: xi.to_vec(),
                    min: value,
                    min_at: xi.to_vec(),
                });
                self.max_norm_sq[k] = s;
                self.min_norm_sq[k] = s;
            }
            Some(a) => {
                a.count += 1;
                if value > a.max || (value == a.max && s > self.max_norm_sq[k]) {
                    a.max = value;
                    a.max_at = xi.to_vec();
                    self.max_norm_sq[k] = s;
                }
                if value < a.min || (value == a.min && s > self.min_norm_sq[k]) {
                    a.min = value;
                    a.min_at = xi.to_vec();
                    self.min_norm_sq[k] = s;
                }
            }
        }
    }

    /// Complete annuli that received at least one sample, in order.
    pub fn annuli(&self) -> Vec<AnnulusExtremes> {
        self.annuli.iter().flatten().cloned().collect()
    }

    pub fn merge(&mut self, other: &AnnulusStats) {
        for a in other.annuli.iter().flatten() {
            // Replaying the two extremes reproduces the merged extremes.
            self.push(&a.max_at, a.max);
            self.push(&a.min_at, a.min);
            if let Some(mine) = &mut self.annuli[a.k as usize] {
                mine.count = (mine.count + a.count) - 2;
            }
        }
    }

    /// `(log2 |xi*|, log2 value)` at each annulus maximum.
    pub fn max_points(&self) -> Vec<(f64, f64)> {
        self.annuli().iter().map(|a| (log2_norm(&a.max_at), a.max.log2())).collect()
    }

    /// `(log2 |xi*|, log2 value)` at each annulus minimum.
    pub fn min_points(&self) -> Vec<(f64, f64)> {
        self.annuli().iter().map(|a| (log2_norm(&a.min_at), a.min.log2())).collect()
    }
}

fn log2_norm(xi: &[i64]) -> f64 {
    0.5 * (norm_sq(xi) as f64).log2()
}

/// Least-squares line through log-log points with windowed slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    #[serde(with = "ext_f64")]
    pub slope: f64,
    #[serde(with = "ext_f64")]
    pub intercept: f64,
    /// RMS deviation in log2 units.
    #[serde(with = "ext_f64")]
    pub residual: f64,
    /// Slopes over consecutive windows of `WINDOW` annuli.
    #[serde(with = "ext_f64::vec")]
    pub window_slopes: Vec<f64>,
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

fn window_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.iter().any(|p| p.1 == f64::NEG_INFINITY) {
        return f64::NEG_INFINITY;
    }
    if pts.iter().any(|p| p.1 == f64::INFINITY) {
        return f64::INFINITY;
    }
    line_fit(pts).0
}

impl PowerFit {
    /// Fit finite points; infinite ordinates only enter the windowed slopes.
    pub fn from_points(pts: &[(f64, f64)]) -> Option<PowerFit> {
        let finite: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1.is_finite()).collect();
        let window_slopes = pts.windows(WINDOW).map(window_slope).collect();
        if finite.len() < 2 {
            return None;
        }
        let (slope, intercept, residual) = line_fit(&finite);
        Some(PowerFit { slope, intercept, residual, window_slopes })
    }

    pub fn tail_slope(&self) -> f64 {
        self.window_slopes.last().copied().unwrap_or(self.slope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "exponent")]
pub enum OrderVerdict {
    Polynomial(f64),
    RapidDecay,
    Irregular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub verdict: OrderVerdict,
    /// Fitted exponent of the annulus maxima, when at least two are nonzero.
    pub exponent: Option<f64>,
    pub fit: Option<PowerFit>,
    /// Slope over the outermost window (`-inf` when it vanishes identically).
    #[serde(with = "ext_f64")]
    pub tail_slope: f64,
    pub annuli: Vec<AnnulusExtremes>,
}

impl OrderFit {
    /// Superpolynomial growth: the outer window rises faster than the probe.
    pub fn grows_superpolynomially(&self, n_probe: f64) -> bool {
        self.tail_slope > n_probe
    }

    pub fn is_rapid_decay(&self) -> bool {
        self.verdict == OrderVerdict::RapidDecay
    }
}

/// Classify the maxima collected in `stats`.
pub fn estimate_order_from_stats(stats: &AnnulusStats, tol: &Tolerances) -> Result<OrderFit> {
    let annuli = stats.annuli();
    if annuli.len() < MIN_ANNULI {
        return Err(Error::InsufficientData { needed: MIN_ANNULI, found: annuli.len() });
    }
    let pts = stats.max_points();
    let fit = PowerFit::from_points(&pts);
    let tail_slope = pts[pts.len() - WINDOW..].to_vec();
    let tail_slope = window_slope(&tail_slope);
    let all_zero = annuli.iter().all(|a| a.max == 0.0);
    let verdict = if all_zero || tail_slope < -tol.n_probe {
        OrderVerdict::RapidDecay
    } else {
        match &fit {
            Some(f) if f.residual <= tol.fit_resid_tol => OrderVerdict::Polynomial(f.slope),
            _ => OrderVerdict::Irregular,
        }
    };
    Ok(OrderFit { verdict, exponent: fit.as_ref().map(|f| f.slope), fit, tail_slope, annuli })
}

/// Fit `log max_{annulus} |a|` against `log |xi|` over the complete annuli.
pub fn estimate_order<'a, I>(values: I, lattice: &Lattice, tol: &Tolerances) -> Result<OrderFit>
where
    I: IntoIterator<Item = (&'a [i64], f64)>,
{
    let mut stats = AnnulusStats::new(*lattice);
    for (xi, v) in values {
        stats.push(xi, v.abs());
    }
    estimate_order_from_stats(&stats, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_power(p: f64) -> OrderFit {
        let l = Lattice::new(1, 256).unwrap();
        let pts = l.points();
        estimate_order(
            pts.iter().map(|xi| (xi.as_slice(), (xi[0].abs() as f64).powf(p))),
            &l,
            &Tolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn recovers_pure_powers() {
        for p in [0.0, 1.0, 2.0, 3.0] {
            match fit_power(p).verdict {
                OrderVerdict::Polynomial(nu) => assert!((nu - p).abs() < 0.05, "{p} -> {nu}"),
                v => panic!("{v:?}"),
            }
        }
    }

    #[test]
    fn exponential_decay_is_rapid() {
        let l = Lattice::new(1, 256).unwrap();
        let pts = l.points();
        let f = estimate_order(
            pts.iter().map(|xi| (xi.as_slice(), (-(xi[0].abs() as f64)).exp())),
            &l,
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(f.verdict, OrderVerdict::RapidDecay);
    }

    #[test]
    fn too_few_annuli() {
        let l = Lattice::new(1, 7).unwrap();
        let pts = l.points();
        let r = estimate_order(pts.iter().map(|xi| (xi.as_slice(), 1.0)), &l, &Tolerances::default());
        assert!(matches!(r, Err(Error::InsufficientData { found: 3, .. })));
    }
}
