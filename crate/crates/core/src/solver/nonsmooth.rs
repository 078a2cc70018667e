//! Solutions supported on witness frequencies, which are not smooth.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{d_t, split_antiderivative, sup_norm, ModeTable};
use crate::params::Tolerances;
use crate::report::ext_f64;
use crate::triangular::EigenField;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Data of one witness column.
#[derive(Debug, Clone, Serialize)]
pub struct NonSmoothMode {
    pub xi: Vec<i64>,
    /// Integer `n` nearest to `Re lambda_0`; the column oscillates as `e^{-i n t}`.
    pub shift: i64,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub kappa: f64,
    /// `|lambda_0 - n|`, zero for exact resonances.
    #[serde(serialize_with = "ext_f64::serialize")]
    pub defect: f64,
    /// `sup_t |L u_hat + i f_hat|` with `L = D_t + lambda`.
    #[serde(serialize_with = "ext_f64::serialize")]
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct NonSmoothSolution {
    pub u: ModeTable,
    pub f: ModeTable,
    pub modes: Vec<NonSmoothMode>,
}

impl NonSmoothSolution {
    pub fn max_residual(&self) -> f64 {
        self.modes.iter().map(|m| m.residual).fold(0.0, f64::max)
    }
}

/// Scalar table of branch `k` of an eigenvalue field.
pub fn branch_table(field: &EigenField, k: usize) -> Result<ModeTable> {
    let mut table = ModeTable::new(field.grid.len, field.lattice.dim, 1)?;
    for b in &field.modes {
        let row = b
            .lambda
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("branch {k} does not exist for {} branches", b.m())))?;
        table.insert(b.xi.clone(), vec![row.clone()])?;
    }
    Ok(table)
}

/// For each witness `xi`, the column
/// `u_hat(t) = kappa e^{-i n t} exp(-i (Psi(t) - Psi(0)))`, where
/// `lambda = lambda_0 + Psi'` and `n` is the integer nearest to
/// `Re lambda_0`. This is `kappa exp(-i int_0^t lambda)` up to the factor
/// `e^{-i (lambda_0 - n) t}`, so it is exactly periodic; `kappa` makes
/// `sup_t |u_hat| = 1`. The right-hand side `f_hat = i (lambda_0 - n) u_hat`
/// satisfies `(D_t + lambda) u_hat = -i f_hat`. Averages within `res_tol`
/// of an integer count as exact resonances and get `f_hat = 0`; the
/// neglected defect then shows up in the residual.
pub fn build_nonsmooth_solution(
    lambda: &ModeTable,
    witnesses: &[Vec<i64>],
    tol: &Tolerances,
) -> Result<NonSmoothSolution> {
    if witnesses.is_empty() {
        return Err(Error::EmptyWitnessList);
    }
    if lambda.components != 1 {
        return Err(Error::ShapeMismatch(format!("expected one branch, got {}", lambda.components)));
    }
    let len = lambda.t_len;
    let h = 2.0 * std::f64::consts::PI / len as f64;
    let mut u = ModeTable::new(len, lambda.dim, 1)?;
    let mut f = ModeTable::new(len, lambda.dim, 1)?;
    let mut modes = Vec::with_capacity(witnesses.len());
    for xi in witnesses {
        let lam = &lambda
            .data
            .get(xi)
            .ok_or_else(|| Error::InvalidInput(format!("witness {xi:?} is not in the branch table")))?[0];
        let (l0, psi) = split_antiderivative(lam)?;
        let shift = l0.re.round();
        let w: Vec<Complex64> = psi.iter().map(|p| (-I * (p - psi[0])).exp()).collect();
        let kappa = 1.0 / sup_norm(&w);
        let envelope: Vec<Complex64> = w.iter().map(|z| z * kappa).collect();
        let carrier: Vec<Complex64> = (0..len).map(|j| Complex64::from_polar(1.0, -shift * h * j as f64)).collect();
        let uh: Vec<Complex64> = envelope.iter().zip(&carrier).map(|(e, c)| e * c).collect();
        let defect = if (l0 - shift).norm() <= tol.res_tol { Complex64::new(0.0, 0.0) } else { l0 - shift };
        let fh: Vec<Complex64> = uh.iter().map(|z| I * defect * z).collect();
        // D_t (e^{-int} W) = e^{-int} (D_t W - n W): differentiating the
        // envelope avoids aliasing the carrier on the grid.
        let dw = d_t(&envelope)?;
        let residual = (0..len)
            .map(|j| (carrier[j] * (dw[j] - shift * envelope[j]) + lam[j] * uh[j] + I * fh[j]).norm())
            .fold(0.0, f64::max);
        u.insert(xi.clone(), vec![uh])?;
        f.insert(xi.clone(), vec![fh])?;
        modes.push(NonSmoothMode { xi: xi.clone(), shift: shift as i64, kappa, defect: defect.norm(), residual });
    }
    Ok(NonSmoothSolution { u, f, modes })
}

/// Embed a scalar table as component `row` of an `m`-vector, the other
/// components zero.
pub fn embed_leading(table: &ModeTable, m: usize, row: usize) -> Result<ModeTable> {
    if table.components != 1 || row >= m {
        return Err(Error::ShapeMismatch(format!("cannot embed {} components as row {row} of {m}", table.components)));
    }
    let mut out = ModeTable::new(table.t_len, table.dim, m)?;
    for (xi, rows) in &table.data {
        let mut v = vec![vec![Complex64::new(0.0, 0.0); table.t_len]; m];
        v[row] = rows[0].clone();
        out.insert(xi.clone(), v)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_resonance_gives_plane_waves() {
        let pts: Vec<Vec<i64>> = (-4..=4).map(|x| vec![x]).collect();
        let lambda = ModeTable::from_fn(16, &pts, |_, xi| Complex64::new(xi[0] as f64, 0.0)).unwrap();
        let sol = build_nonsmooth_solution(&lambda, &pts, &Tolerances::default()).unwrap();
        for xi in &pts {
            let row = &sol.u.data[xi][0];
            for (j, z) in row.iter().enumerate() {
                let t = 2.0 * PI * j as f64 / 16.0;
                assert!((z - Complex64::from_polar(1.0, -(xi[0] as f64) * t)).norm() < 1e-14);
            }
            assert!(sol.f.data[xi][0].iter().all(|z| z.norm() == 0.0));
        }
        assert!(sol.max_residual() < 1e-12);
    }

    #[test]
    fn single_witness_gives_one_column() {
        let pts: Vec<Vec<i64>> = (-3..=3).map(|x| vec![x]).collect();
        let lambda = ModeTable::from_fn(64, &pts, |t, xi| Complex64::new(xi[0] as f64 + 0.3, t.cos())).unwrap();
        let sol = build_nonsmooth_solution(&lambda, &[vec![2]], &Tolerances::default()).unwrap();
        assert_eq!(sol.u.data.len(), 1);
        assert!((sup_norm(&sol.u.data[&vec![2]][0]) - 1.0).abs() < 1e-15);
        assert!((sol.modes[0].defect - 0.3).abs() < 1e-12);
        assert!(sol.max_residual() < 1e-10);
        let e = embed_leading(&sol.u, 3, 0).unwrap();
        assert_eq!(e.data[&vec![2]][0], sol.u.data[&vec![2]][0]);
        assert!(e.data[&vec![2]][2].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn empty_witness_list_is_an_error() {
        let lambda = ModeTable::new(8, 1, 1).unwrap();
        assert!(matches!(build_nonsmooth_solution(&lambda, &[], &Tolerances::default()), Err(Error::EmptyWitnessList)));
    }
}
