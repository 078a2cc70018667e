//! CSV emitters for plotting and inspection.

use crate::diagnostics::{GHVerdict, PerturbationFit};
use crate::error::Result;
use crate::linalg::CMat;
use crate::triangular::TriangularForm;

fn join(xi: &[i64]) -> String {
    xi.iter().map(i64::to_string).collect::<Vec<_>>().join(";")
}

fn xi_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("xi{j}")).collect()
}

/// Sampled `S`, `S^-1`, `Lambda`, `N` and `B` for frequencies with
/// `max_j |xi_j| <= radius`: columns `xi1.., t_index, matrix, row, col, re, im`.
pub fn triangular_csv(form: &TriangularForm, radius: u64) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = xi_header(form.lattice.dim);
    header.extend(["t_index", "matrix", "row", "col", "re", "im"].map(String::from));
    w.write_record(&header)?;
    for f in form.modes.iter().filter(|f| f.xi.iter().all(|x| x.unsigned_abs() <= radius)) {
        let m = f.m();
        for j in 0..f.s.len() {
            let lambda = CMat::from_fn(m, m, |r, c| if r == c { f.lambda[r][j] } else { Default::default() });
            for (name, mat) in [("S", &f.s[j]), ("S_inv", &f.s_inv[j]), ("Lambda", &lambda), ("N", &f.n[j]), ("B", &f.b[j])] {
                for r in 0..m {
                    for c in 0..m {
                        if name == "Lambda" && r != c {
                            continue;
                        }
                        let z = mat[(r, c)];
                        let mut rec: Vec<String> = f.xi.iter().map(i64::to_string).collect();
                        rec.extend([j.to_string(), name.into(), (r + 1).to_string(), (c + 1).to_string()]);
                        rec.extend([format!("{:?}", z.re), format!("{:?}", z.im)]);
                        w.write_record(&rec)?;
                    }
                }
            }
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Per-annulus extremes of every fitted distance: columns
/// `branch, annulus, radius_lo, radius_hi, count, min, min_at, max, max_at`.
/// The corroborating fit, if any, is labelled `corroboration`.
pub fn annulus_minima_csv(v: &GHVerdict) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["branch", "annulus", "radius_lo", "radius_hi", "count", "min", "min_at", "max", "max_at"])?;
    let fits = v
        .branches
        .iter()
        .filter_map(|b| b.fit.as_ref().map(|f| (b.branch.to_string(), f)))
        .chain(v.corroboration.iter().map(|f| ("corroboration".to_string(), f)));
    for (label, fit) in fits {
        for a in &fit.annuli {
            w.write_record([
                label.clone(),
                a.k.to_string(),
                (1u64 << a.k).to_string(),
                (1u64 << (a.k + 1)).to_string(),
                a.count.to_string(),
                format!("{:?}", a.min),
                join(&a.min_at),
                format!("{:?}", a.max),
                join(&a.max_at),
            ])?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Fitted coefficients `sigma_{j,k}`: columns `eta.., branch, order, re, im`.
pub fn perturbation_csv(fit: &PerturbationFit) -> Result<Vec<u8>> {
    let dim = fit.points.first().map_or(1, |p| p.eta.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=dim).map(|j| format!("eta{j}")).collect();
    header.extend(["branch", "order", "re", "im"].map(String::from));
    w.write_record(&header)?;
    for p in &fit.points {
        for (j, row) in p.sigma.iter().enumerate() {
            for (k, z) in row.iter().enumerate() {
                let mut rec: Vec<String> = p.eta.iter().map(i64::to_string).collect();
                rec.extend([(j + 1).to_string(), k.to_string(), format!("{:?}", z.re), format!("{:?}", z.im)]);
                w.write_record(&rec)?;
            }
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}
