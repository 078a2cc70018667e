//! Small dense complex linear algebra: Schur form, eigenpairs, nullspaces.
//!
//! Matrices here are at most 8x8, so clarity wins over blocking.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Ordering of eigenvalues: modulus, then real part, then imaginary part.
pub fn modulus_order(a: &Complex64, b: &Complex64) -> Ordering {
    a.norm()
        .total_cmp(&b.norm())
        .then(a.re.total_cmp(&b.re))
        .then(a.im.total_cmp(&b.im))
}

/// Rotation `[c s; -conj(s) c]` with real `c` mapping `(x, y)` to `(r, 0)`.
pub fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    if y == ZERO {
        return (1.0, ZERO);
    }
    if x == ZERO {
        return (0.0, y.conj() / y.norm());
    }
    let nx = x.norm();
    let rho = nx.hypot(y.norm());
    (nx / rho, (x / nx) * y.conj() / rho)
}

/// `A = Q T Q^*` with `Q` unitary and `T` upper triangular.
#[derive(Debug, Clone)]
pub struct Schur {
    pub q: CMat,
    pub t: CMat,
}

fn hessenberg(h: &mut CMat, z: &mut CMat) {
    let n = h.nrows();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0] == ZERO { ONE } else { x[0] / x[0].norm() };
        let mut v = x;
        v[0] += phase * xnorm;
        let vv: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vv == 0.0 {
            continue;
        }
        let scale = 2.0 / vv;
        for j in 0..n {
            let s: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= vi * s * scale;
            }
        }
        for m in [&mut *h, &mut *z] {
            for i in 0..n {
                let s: Complex64 = v.iter().enumerate().map(|(l, vl)| m[(i, k + 1 + l)] * vl).sum();
                for (l, vl) in v.iter().enumerate() {
                    m[(i, k + 1 + l)] -= s * vl.conj() * scale;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

fn negligible_subdiagonal(h: &CMat, l: usize, hi: usize) -> bool {
    let ulp = f64::EPSILON;
    let smlnum = f64::MIN_POSITIVE * (h.nrows() as f64 / ulp);
    let sub = cabs1(h[(l, l - 1)]);
    if sub <= smlnum {
        return true;
    }
    let mut tst = cabs1(h[(l - 1, l - 1)]) + cabs1(h[(l, l)]);
    if tst == 0.0 {
        if l >= 2 {
            tst += h[(l - 1, l - 2)].re.abs();
        }
        if l < hi {
            tst += h[(l + 1, l)].re.abs();
        }
    }
    if sub > ulp * tst {
        return false;
    }
    // Ahues-Tisseur refinement of the deflation test.
    let sup = cabs1(h[(l - 1, l)]);
    let (ab, ba) = (sub.max(sup), sub.min(sup));
    let d1 = cabs1(h[(l, l)]);
    let d2 = cabs1(h[(l - 1, l - 1)] - h[(l, l)]);
    let (aa, bb) = (d1.max(d2), d1.min(d2));
    let s = aa + ab;
    ba * (ab / s) <= smlnum.max(ulp * (bb * (aa / s)))
}

fn eig2_closed(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let mu = (a + d) * 0.5;
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let (l1, l2) = (mu + disc, mu - disc);
    // Recover the small root from the determinant when the sum cancels.
    let det = a * d - b * c;
    let guard = (a * d).norm() + (b * c).norm();
    if det.norm() >= 1e-8 * guard {
        if l1.norm() >= l2.norm() && l1 != ZERO && l2.norm() < 1e-3 * l1.norm() {
            return (l1, det / l1);
        }
        if l2.norm() > l1.norm() && l1.norm() < 1e-3 * l2.norm() {
            return (det / l2, l2);
        }
    }
    (l1, l2)
}

fn qr_iterate(h: &mut CMat, z: &mut CMat) -> Result<()> {
    let n = h.nrows();
    if n < 2 {
        return Ok(());
    }
    let mut hi = n - 1;
    let mut its = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            if negligible_subdiagonal(h, l, hi) {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > 100 * n {
            return Err(Error::NoConvergence { iterations: total });
        }
        let d = h[(hi, hi)];
        let shift = if its.is_multiple_of(11) {
            d + 0.75 * cabs1(h[(hi, hi - 1)])
        } else {
            let (l1, l2) = eig2_closed(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], d);
            if (l1 - d).norm() <= (l2 - d).norm() {
                l1
            } else {
                l2
            }
        };
        let mut x = h[(l, l)] - shift;
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let start = if k > l { k - 1 } else { l };
            for j in start..n {
                let (a, b) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            for i in 0..=(k + 2).min(hi) {
                let (a, b) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            for i in 0..n {
                let (a, b) = (z[(i, k)], z[(i, k + 1)]);
                z[(i, k)] = a * c + b * s.conj();
                z[(i, k + 1)] = -a * s + b * c;
            }
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
        }
    }
    Ok(())
}

/// Swap diagonal entries `k` and `k+1` of an upper-triangular `t` by a
/// unitary similarity, updating `q`.
fn swap_adjacent(t: &mut CMat, q: &mut CMat, k: usize) {
    let n = t.nrows();
    let (t11, t22) = (t[(k, k)], t[(k + 1, k + 1)]);
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    for j in k + 2..n {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = x * c + s * y;
        t[(k + 1, j)] = y * c - s.conj() * x;
    }
    for i in 0..k {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = x * c + s.conj() * y;
        t[(i, k + 1)] = y * c - s * x;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..n {
        let (x, y) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = x * c + s.conj() * y;
        q[(i, k + 1)] = y * c - s * x;
    }
}

/// Reorder the diagonal of a Schur form according to `order`.
pub fn reorder<F: Fn(&Complex64, &Complex64) -> Ordering>(s: &mut Schur, order: F) {
    let n = s.t.nrows();
    for i in 0..n {
        let mut best = i;
        for j in i + 1..n {
            if order(&s.t[(j, j)], &s.t[(best, best)]) == Ordering::Less {
                best = j;
            }
        }
        for p in (i..best).rev() {
            swap_adjacent(&mut s.t, &mut s.q, p);
        }
    }
}

/// Complex Schur form with the diagonal in modulus order.
pub fn schur(a: &CMat) -> Result<Schur> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    let mut t = a.clone();
    let mut q = CMat::identity(n, n);
    hessenberg(&mut t, &mut q);
    qr_iterate(&mut t, &mut q)?;
    for i in 0..n {
        for j in 0..i {
            t[(i, j)] = ZERO;
        }
    }
    let mut s = Schur { q, t };
    reorder(&mut s, modulus_order);
    Ok(s)
}

/// Eigenvalue with a unit eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
}

fn normalized(v: Vec<Complex64>) -> Vec<Complex64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|z| z / n).collect()
    }
}

fn null_vector_2x2(a: &CMat, lambda: Complex64, fallback: usize) -> Vec<Complex64> {
    let m11 = a[(0, 0)] - lambda;
    let m12 = a[(0, 1)];
    let m21 = a[(1, 0)];
    let m22 = a[(1, 1)] - lambda;
    let n1 = m11.norm_sqr() + m12.norm_sqr();
    let n2 = m21.norm_sqr() + m22.norm_sqr();
    let v = if n1 >= n2 && n1 > 0.0 {
        vec![m12, -m11]
    } else if n2 > 0.0 {
        vec![m22, -m21]
    } else {
        let mut e = vec![ZERO; 2];
        e[fallback] = ONE;
        e
    };
    normalized(v)
}

/// Eigenpairs in modulus order. 2x2 matrices use closed forms, which keep
/// full relative accuracy for tiny or exactly repeated eigenvalues.
pub fn eigenpairs(a: &CMat) -> Result<Vec<EigenPair>> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::ShapeMismatch("eigenpairs of a non-square matrix".into()));
    }
    match n {
        0 => Ok(vec![]),
        1 => Ok(vec![EigenPair { value: a[(0, 0)], vector: vec![ONE] }]),
        2 => {
            let (l1, l2) = eig2_closed(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            let mut pairs = vec![
                EigenPair { value: l1, vector: null_vector_2x2(a, l1, 0) },
                EigenPair { value: l2, vector: null_vector_2x2(a, l2, 1) },
            ];
            if modulus_order(&l2, &l1) == Ordering::Less {
                pairs.swap(0, 1);
            }
            Ok(pairs)
        }
        _ => {
            let s = schur(a)?;
            let tn = frob(&s.t);
            let smin = (f64::EPSILON * tn).max(f64::MIN_POSITIVE);
            Ok((0..n)
                .map(|k| {
                    let mut y = vec![ZERO; n];
                    y[k] = ONE;
                    for i in (0..k).rev() {
                        let acc: Complex64 = (i + 1..=k).map(|j| s.t[(i, j)] * y[j]).sum();
                        let mut d = s.t[(i, i)] - s.t[(k, k)];
                        if d.norm() < smin {
                            d = Complex64::new(smin, 0.0);
                        }
                        y[i] = -acc / d;
                    }
                    let h: Vec<Complex64> =
                        (0..n).map(|r| (0..n).map(|c| s.q[(r, c)] * y[c]).sum()).collect();
                    EigenPair { value: s.t[(k, k)], vector: normalized(h) }
                })
                .collect())
        }
    }
}

/// Eigenvalues in modulus order.
pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    if a.nrows() <= 2 {
        return Ok(eigenpairs(a)?.into_iter().map(|p| p.value).collect());
    }
    let s = schur(a)?;
    Ok((0..a.nrows()).map(|k| s.t[(k, k)]).collect())
}

pub fn eigen_residual(a: &CMat, p: &EigenPair) -> f64 {
    let n = a.nrows();
    (0..n)
        .map(|r| {
            let row: Complex64 = (0..n).map(|c| a[(r, c)] * p.vector[c]).sum();
            (row - p.value * p.vector[r]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Orthonormal basis (as columns) of the vectors `x` with `|b x| <= tol`,
/// for square `b`.
pub fn nullspace(b: &CMat, tol: f64) -> CMat {
    let n = b.ncols();
    let svd = b.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^*");
    let cols: Vec<usize> = (0..vt.nrows()).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut out = CMat::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        for r in 0..n {
            out[(r, c)] = vt[(i, r)].conj();
        }
    }
    out
}

/// Unitary matrix whose first column is the unit vector `v`.
pub fn unitary_with_first_column(v: &[Complex64]) -> CMat {
    let n = v.len();
    let phase = if v[0] == ZERO { ONE } else { v[0] / v[0].norm() };
    let vp: Vec<Complex64> = v.iter().map(|z| z * phase.conj()).collect();
    let mut w: Vec<Complex64> = vp.iter().map(|z| -z).collect();
    w[0] += ONE;
    let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let mut u = CMat::identity(n, n);
    if ww > 0.0 {
        for r in 0..n {
            for c in 0..n {
                u[(r, c)] -= w[r] * w[c].conj() * (2.0 / ww);
            }
        }
    }
    for r in 0..n {
        u[(r, 0)] *= phase;
    }
    u
}

pub fn invert(a: &CMat) -> Result<CMat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("matrix is singular".into()))
}

/// Least squares `min |a x - b|` for real data.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .svd(true, true)
        .solve(b, 1e-14)
        .map_err(|e| Error::InvalidInput(e.to_string()))
}
