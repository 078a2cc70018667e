//! Spectral tools on the uniform periodic grid, the mode table format, and
//! decay classification of Fourier coefficient tables.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{I, ZERO};
use crate::params::Tolerances;
use crate::symbol::lattice::Lattice;
use crate::symbol::order::{AnnulusStats, OrderFit, estimate_order_from_stats};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(len: usize) -> Plans {
    PLANS.with(|p| {
        p.borrow_mut()
            .entry(len)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
            })
            .clone()
    })
}

fn check_len(len: usize) -> Result<()> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::NonPowerOfTwo(len));
    }
    Ok(())
}

/// Signed frequency of FFT slot `idx`; the Nyquist slot maps to `+len/2`.
pub fn frequency(idx: usize, len: usize) -> i64 {
    if idx <= len / 2 {
        idx as i64
    } else {
        idx as i64 - len as i64
    }
}

/// Normalized coefficients `c_k = mean_j f_j e^{-i k t_j}` in FFT order.
pub fn coefficients(samples: &[Complex64]) -> Result<Vec<Complex64>> {
    let len = samples.len();
    check_len(len)?;
    let mut buf = samples.to_vec();
    plans(len).0.process(&mut buf);
    let scale = 1.0 / len as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    Ok(buf)
}

/// Inverse of [`coefficients`].
pub fn synthesize(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let len = coeffs.len();
    check_len(len)?;
    let mut buf = coeffs.to_vec();
    plans(len).1.process(&mut buf);
    Ok(buf)
}

/// `d^alpha/dt^alpha` of a sampled periodic function, by multiplying Fourier
/// coefficients with `(ik)^alpha`. The Nyquist mode is dropped for odd
/// `alpha`. Exact for trigonometric polynomials of degree below `len/2`.
pub fn spectral_derivative(samples: &[Complex64], alpha: u32) -> Result<Vec<Complex64>> {
    if alpha == 0 {
        check_len(samples.len())?;
        return Ok(samples.to_vec());
    }
    let len = samples.len();
    check_len(len)?;
    // Exactly constant samples have exactly zero derivatives; the FFT would
    // leave rounding noise behind.
    if samples.iter().all(|z| *z == samples[0]) {
        return Ok(vec![ZERO; len]);
    }
    let mut c = coefficients(samples)?;
    for (idx, ck) in c.iter_mut().enumerate() {
        let k = frequency(idx, len);
        if alpha % 2 == 1 && idx == len / 2 {
            *ck = ZERO;
        } else {
            *ck *= (I * k as f64).powu(alpha);
        }
    }
    synthesize(&c)
}

/// Derivatives of orders `0..=alpha_max` from a single forward transform;
/// `out[alpha][j]` is `d^alpha f / dt^alpha` at `t_j`.
pub fn derivative_series(samples: &[Complex64], alpha_max: u32) -> Result<Vec<Vec<Complex64>>> {
    let len = samples.len();
    check_len(len)?;
    if samples.iter().all(|z| *z == samples[0]) {
        let mut out = vec![samples.to_vec()];
        out.extend((0..alpha_max).map(|_| vec![ZERO; len]));
        return Ok(out);
    }
    let c = coefficients(samples)?;
    let mut out = vec![samples.to_vec()];
    for alpha in 1..=alpha_max {
        let d: Vec<Complex64> = c
            .iter()
            .enumerate()
            .map(|(idx, ck)| {
                if alpha % 2 == 1 && idx == len / 2 {
                    ZERO
                } else {
                    ck * (I * frequency(idx, len) as f64).powu(alpha)
                }
            })
            .collect();
        out.push(synthesize(&d)?);
    }
    Ok(out)
}

/// `D_t = -i d/dt` applied to samples.
pub fn d_t(samples: &[Complex64]) -> Result<Vec<Complex64>> {
    Ok(spectral_derivative(samples, 1)?.into_iter().map(|v| -I * v).collect())
}

/// `(1/2pi) int_0^{2pi} f dt` by the trapezoidal rule, which is the sample mean
/// on a uniform periodic grid.
pub fn periodic_quadrature(samples: &[Complex64]) -> Complex64 {
    samples.iter().sum::<Complex64>() / samples.len() as f64
}

/// Mean `f_0` and the periodic antiderivative `Psi` of `f - f_0` with
/// `Psi` of zero mean, so that `int_a^b f = f_0 (b - a) + Psi(b) - Psi(a)`.
pub fn split_antiderivative(samples: &[Complex64]) -> Result<(Complex64, Vec<Complex64>)> {
    let len = samples.len();
    let mut c = coefficients(samples)?;
    let mean = c[0];
    for (idx, ck) in c.iter_mut().enumerate() {
        let k = frequency(idx, len);
        if k == 0 || idx == len / 2 {
            *ck = ZERO;
        } else {
            *ck /= I * k as f64;
        }
    }
    Ok((mean, synthesize(&c)?))
}

/// Values at `t_j + shift` of the trigonometric interpolant with FFT-ordered
/// coefficients `coeffs`. The Nyquist slot is split evenly between `+-len/2`.
pub fn shifted_values(coeffs: &[Complex64], shift: f64) -> Result<Vec<Complex64>> {
    let len = coeffs.len();
    let mut c = coeffs.to_vec();
    for (idx, ck) in c.iter_mut().enumerate() {
        if idx == len / 2 {
            *ck *= (len as f64 / 2.0 * shift).cos();
        } else {
            *ck *= Complex64::from_polar(1.0, frequency(idx, len) as f64 * shift);
        }
    }
    synthesize(&c)
}

/// Fraction of spectral energy at frequencies `|k| >= len/4`; small values
/// indicate the samples resolve the function.
pub fn spectral_tail(samples: &[Complex64]) -> Result<f64> {
    let len = samples.len();
    let c = coefficients(samples)?;
    let total: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let tail: f64 = c
        .iter()
        .enumerate()
        .filter(|(i, _)| frequency(*i, len).unsigned_abs() as usize >= len / 4)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    Ok(tail / total)
}

pub fn sup_norm(samples: &[Complex64]) -> f64 {
    samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Partial Fourier coefficients `u_hat(t_j, xi)` for a set of frequencies.
/// Each entry holds `components` rows of `t_len` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable {
    pub t_len: usize,
    pub dim: usize,
    pub components: usize,
    pub data: BTreeMap<Vec<i64>, Vec<Vec<Complex64>>>,
}

impl ModeTable {
    pub fn new(t_len: usize, dim: usize, components: usize) -> Result<Self> {
        check_len(t_len)?;
        Ok(ModeTable { t_len, dim, components, data: BTreeMap::new() })
    }

    pub fn insert(&mut self, xi: Vec<i64>, rows: Vec<Vec<Complex64>>) -> Result<()> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("xi {xi:?} is not {}-dimensional", self.dim)));
        }
        if rows.len() != self.components || rows.iter().any(|r| r.len() != self.t_len) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} components of {} samples",
                self.components, self.t_len
            )));
        }
        self.data.insert(xi, rows);
        Ok(())
    }

    /// Single-component table from a closure `f(t, xi)`.
    pub fn from_fn<F: Fn(f64, &[i64]) -> Complex64>(
        t_len: usize,
        points: &[Vec<i64>],
        f: F,
    ) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(1);
        let mut table = ModeTable::new(t_len, dim, 1)?;
        let step = 2.0 * std::f64::consts::PI / t_len as f64;
        for xi in points {
            let row = (0..t_len).map(|j| f(j as f64 * step, xi)).collect();
            table.insert(xi.clone(), vec![row])?;
        }
        Ok(table)
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (1..=self.dim).map(|j| format!("xi{j}")).collect();
        if self.components > 1 {
            h.push("component".into());
        }
        h.extend(["t_index", "re", "im"].map(String::from));
        h
    }

    /// CSV with columns `xi1..xin, [component,] t_index, re, im`. Floats are
    /// written in shortest round-trip form, so reading back is bit-exact.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        for (xi, rows) in &self.data {
            for (c, row) in rows.iter().enumerate() {
                for (j, z) in row.iter().enumerate() {
                    let mut rec: Vec<String> = xi.iter().map(|x| x.to_string()).collect();
                    if self.components > 1 {
                        rec.push((c + 1).to_string());
                    }
                    rec.push(j.to_string());
                    rec.push(format!("{:?}", z.re));
                    rec.push(format!("{:?}", z.im));
                    wr.write_record(&rec)?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let dim = header.iter().take_while(|h| h.starts_with("xi")).count();
        let has_component = header.get(dim).map(|h| h == "component").unwrap_or(false);
        let base = dim + has_component as usize;
        if dim == 0 || header.len() != base + 3 || header[base] != "t_index" || header[base + 1] != "re" || header[base + 2] != "im" {
            return Err(Error::ShapeMismatch(format!("unexpected CSV header {header:?}")));
        }
        let mut cells: BTreeMap<Vec<i64>, BTreeMap<(usize, usize), Complex64>> = BTreeMap::new();
        let bad = |what: &str| Error::ShapeMismatch(format!("bad {what} in CSV"));
        for rec in rd.records() {
            let rec = rec?;
            let xi: Vec<i64> = (0..dim)
                .map(|j| rec[j].trim().parse().map_err(|_| bad("frequency")))
                .collect::<Result<_>>()?;
            let comp = if has_component {
                rec[dim].trim().parse::<usize>().map_err(|_| bad("component"))?.checked_sub(1).ok_or_else(|| bad("component"))?
            } else {
                0
            };
            let t: usize = rec[base].trim().parse().map_err(|_| bad("t_index"))?;
            let re: f64 = rec[base + 1].trim().parse().map_err(|_| bad("value"))?;
            let im: f64 = rec[base + 2].trim().parse().map_err(|_| bad("value"))?;
            cells.entry(xi).or_default().insert((comp, t), Complex64::new(re, im));
        }
        let components = cells.values().flat_map(|m| m.keys().map(|k| k.0 + 1)).max().unwrap_or(1);
        let t_len = cells.values().flat_map(|m| m.keys().map(|k| k.1 + 1)).max().unwrap_or(0);
        let mut table = ModeTable::new(t_len, dim, components)?;
        for (xi, m) in cells {
            if m.len() != components * t_len {
                return Err(Error::ShapeMismatch(format!("frequency {xi:?} has {} of {} samples", m.len(), components * t_len)));
            }
            let mut rows = vec![vec![ZERO; t_len]; components];
            for ((c, t), z) in m {
                rows[c][t] = z;
            }
            table.insert(xi, rows)?;
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayClass {
    /// Every t-derivative decays faster than any probed power of `|xi|`.
    Smooth,
    /// Polynomially bounded: a periodic distribution, not a smooth function.
    DistributionOnly,
    /// Some derivative grows faster than every probed power.
    DivergentSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub class: DecayClass,
    /// Order fit of `sup_t |d_t^alpha u_hat(t, xi)|` for `alpha = 0..=alpha_max`.
    pub per_alpha: Vec<OrderFit>,
}

/// Classify a coefficient table by the growth of its t-derivatives.
pub fn classify_decay(table: &ModeTable, alpha_max: u32, lattice: &Lattice, tol: &Tolerances) -> Result<DecayReport> {
    let mut per_alpha = Vec::new();
    for alpha in 0..=alpha_max {
        let mut stats = AnnulusStats::new(*lattice);
        for (xi, rows) in &table.data {
            let mut s = 0.0f64;
            for row in rows {
                s = s.max(sup_norm(&spectral_derivative(row, alpha)?));
            }
            stats.push(xi, s);
        }
        per_alpha.push(estimate_order_from_stats(&stats, tol)?);
    }
    let class = if per_alpha.iter().any(|f| f.grows_superpolynomially(tol.n_probe)) {
        DecayClass::DivergentSeries
    } else if per_alpha.iter().all(|f| f.is_rapid_decay()) {
        DecayClass::Smooth
    } else {
        DecayClass::DistributionOnly
    };
    Ok(DecayReport { class, per_alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_sine() {
        let t: Vec<f64> = (0..32).map(|j| 2.0 * PI * j as f64 / 32.0).collect();
        let s: Vec<Complex64> = t.iter().map(|&t| Complex64::new(t.sin(), 0.0)).collect();
        let d = spectral_derivative(&s, 1).unwrap();
        for (j, &tj) in t.iter().enumerate() {
            assert!((d[j] - Complex64::new(tj.cos(), 0.0)).norm() < 1e-14);
        }
        assert!(matches!(spectral_derivative(&s[..30], 1), Err(Error::NonPowerOfTwo(30))));
    }

    #[test]
    fn quadrature_of_cos_squared() {
        let s: Vec<Complex64> =
            (0..16).map(|j| Complex64::new((2.0 * PI * j as f64 / 16.0).cos().powi(2), 0.0)).collect();
        assert!((periodic_quadrature(&s) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn antiderivative_of_cosine() {
        let s: Vec<Complex64> =
            (0..16).map(|j| Complex64::new(2.0 + (2.0 * PI * j as f64 / 16.0).cos(), 0.0)).collect();
        let (mean, psi) = split_antiderivative(&s).unwrap();
        assert!((mean.re - 2.0).abs() < 1e-15);
        for (j, p) in psi.iter().enumerate() {
            assert!((p.re - (2.0 * PI * j as f64 / 16.0).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn shifted_interpolation_is_exact_for_trig_polynomials() {
        let f = |t: f64| Complex64::new(t.cos(), (3.0 * t).sin());
        let s: Vec<Complex64> = (0..16).map(|j| f(2.0 * PI * j as f64 / 16.0)).collect();
        let v = shifted_values(&coefficients(&s).unwrap(), 0.1234).unwrap();
        for (j, z) in v.iter().enumerate() {
            assert!((z - f(2.0 * PI * j as f64 / 16.0 + 0.1234)).norm() < 1e-14);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let pts = vec![vec![-1], vec![0], vec![2]];
        let t = ModeTable::from_fn(8, &pts, |t, xi| Complex64::new((xi[0] as f64 * t).sin() / 3.0, 0.1 * t)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ModeTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }
}
