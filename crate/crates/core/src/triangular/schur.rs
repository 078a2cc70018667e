//! Unitary triangularization of a constant matrix and of a commuting family.

use crate::error::{Error, Result};
use crate::linalg::{frob, schur, unitary_with_first_column, CMat};
use crate::params::Tolerances;

/// `S^* A S = T` with `S` unitary and the diagonal of `T` in modulus order.
pub fn schur_constant(a: &CMat) -> Result<(CMat, CMat)> {
    let s = schur(a)?;
    Ok((s.q, s.t))
}

fn adjoint(a: &CMat) -> CMat {
    a.adjoint()
}

/// Worst relative commutator `|AB - BA| / (|A| |B|)` over all pairs.
pub fn worst_commutator(family: &[CMat]) -> Option<((usize, usize), f64)> {
    let mut worst: Option<((usize, usize), f64)> = None;
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let (a, b) = (&family[i], &family[j]);
            let scale = frob(a) * frob(b);
            let c = if scale == 0.0 { 0.0 } else { frob(&(a * b - b * a)) / scale };
            if worst.map(|w| c > w.1).unwrap_or(true) {
                worst = Some(((i, j), c));
            }
        }
    }
    worst
}

/// Orthonormal columns spanning the approximate kernel of the square `b`.
/// Falls back to the least singular direction when nothing is within `tol`.
fn kernel(b: &CMat, tol: f64) -> CMat {
    let n = b.ncols();
    let svd = b.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^*");
    let sv = &svd.singular_values;
    let mut cols: Vec<usize> = (0..n).filter(|&i| sv[i] <= tol).collect();
    if cols.is_empty() {
        let least = (0..n).min_by(|&a, &b| sv[a].total_cmp(&sv[b])).unwrap();
        cols.push(least);
    }
    CMat::from_fn(n, cols.len(), |r, c| vt[(cols[c], r)].conj())
}

/// A unit vector that is an eigenvector of every matrix of a commuting family.
fn common_eigenvector(family: &[CMat]) -> Result<Vec<num_complex::Complex64>> {
    let n = family[0].nrows();
    let mut basis = CMat::identity(n, n);
    for a in family {
        let restricted = adjoint(&basis) * a * &basis;
        let d = restricted.nrows();
        let (_, t) = schur_constant(&restricted)?;
        let lambda = t[(0, 0)];
        let shifted = &restricted - CMat::identity(d, d) * lambda;
        let tol = 1e-8 * (1.0 + frob(a));
        basis = &basis * kernel(&shifted, tol);
    }
    Ok(basis.column(0).iter().copied().collect())
}

/// Unitary `S` with `S^* A S` upper triangular for every `A` of a commuting
/// family. The diagonal of the first matrix comes out in modulus order.
pub fn simultaneous_schur(family: &[CMat], tol: &Tolerances) -> Result<CMat> {
    let Some(first) = family.first() else {
        return Err(Error::InvalidInput("empty matrix family".into()));
    };
    let n = first.nrows();
    if family.iter().any(|a| a.nrows() != n || a.ncols() != n) {
        return Err(Error::ShapeMismatch("family members differ in size".into()));
    }
    if let Some((pair, norm)) = worst_commutator(family) {
        if norm > tol.comm_tol {
            return Err(Error::NotCommuting { pair, norm });
        }
    }
    triangularize_family(family)
}

fn triangularize_family(family: &[CMat]) -> Result<CMat> {
    let n = family[0].nrows();
    if n == 1 {
        return Ok(CMat::identity(1, 1));
    }
    let v = common_eigenvector(family)?;
    let u = unitary_with_first_column(&v);
    let rest: Vec<CMat> = family
        .iter()
        .map(|a| {
            let b = adjoint(&u) * a * &u;
            b.view((1, 1), (n - 1, n - 1)).into_owned()
        })
        .collect();
    let inner = triangularize_family(&rest)?;
    let mut block = CMat::identity(n, n);
    block.view_mut((1, 1), (n - 1, n - 1)).copy_from(&inner);
    Ok(u * block)
}

/// Largest strictly-lower entry of `S^* A S`, relative to `|A|`.
pub fn lower_residual(s: &CMat, a: &CMat) -> f64 {
    let t = adjoint(s) * a * s;
    let n = t.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..r {
            worst = worst.max(t[(r, c)].norm());
        }
    }
    let scale = frob(a);
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// `|S^* S - I|_F`.
pub fn unitarity_error(s: &CMat) -> f64 {
    let n = s.nrows();
    let mut e = adjoint(s) * s;
    for i in 0..n {
        e[(i, i)] -= num_complex::Complex64::new(1.0, 0.0);
    }
    frob(&e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_and_nilpotent_inputs() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(2.0)]));
        let (s, t) = schur_constant(&a).unwrap();
        assert!((t[(0, 0)] - c(1.0)).norm() < 1e-15 && (t[(1, 1)] - c(2.0)).norm() < 1e-15);
        assert!(unitarity_error(&s) < 1e-14);
        let n = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let (s, t) = schur_constant(&n).unwrap();
        assert!((&s * &t * s.adjoint() - &n).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn family_of_a_and_its_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = CMat::from_fn(3, 3, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let a2 = &a * &a;
            let s = simultaneous_schur(&[a.clone(), a2.clone()], &Tolerances::default()).unwrap();
            assert!(unitarity_error(&s) < 1e-12);
            assert!(lower_residual(&s, &a) < 1e-9);
            assert!(lower_residual(&s, &a2) < 1e-9);
        }
    }

    #[test]
    fn non_commuting_pair_is_rejected() {
        let e12 = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let e21 = e12.transpose();
        assert!(matches!(
            simultaneous_schur(&[e12, e21], &Tolerances::default()),
            Err(Error::NotCommuting { pair: (0, 1), .. })
        ));
    }

    #[test]
    fn diagonal_family_is_left_alone() {
        let d1 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(2.0), c(3.0)]));
        let d2 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(5.0), c(-1.0), c(0.5)]));
        let s = simultaneous_schur(&[d1.clone(), d2.clone()], &Tolerances::default()).unwrap();
        assert!(lower_residual(&s, &d1) < 1e-14 && lower_residual(&s, &d2) < 1e-14);
        for i in 0..3 {
            assert!((s[(i, i)].norm() - 1.0).abs() < 1e-12);
        }
    }
}
