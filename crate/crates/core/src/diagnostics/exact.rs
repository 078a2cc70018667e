//! Exact rational re-check of resonance witnesses.
//!
//! Floating point cannot decide whether a value is an integer. When a symbol
//! is triangular and every ingredient of a diagonal entry is rational (short
//! decimal or dyadic literals, integer powers, perfect-square roots), the
//! averaged diagonal entry is evaluated exactly and the witness is confirmed
//! or rejected on that value.

use crate::symbol::expr::Expr;
use crate::symbol::lattice::norm_sq;
use crate::symbol::MatrixSymbol;

/// Reduced fraction with a positive denominator. Operations that overflow
/// `i128` return `None`, which callers treat as "not decidable".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: i128,
    den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn isqrt(v: i128) -> Option<i128> {
    if v < 0 {
        return None;
    }
    let mut r = (v as f64).sqrt() as i128;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    (r * r == v).then_some(r)
}

impl Rational {
    pub fn new(num: i128, den: i128) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Some(Rational { num: s * num / g, den: s * den / g })
    }

    pub fn integer(n: i128) -> Self {
        Rational { num: n, den: 1 }
    }

    /// The short decimal a literal was most likely written as (up to 15
    /// digits after the point), else the exact dyadic value of the double.
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() || v.abs() >= 1e30 {
            return None;
        }
        let mut scale: i128 = 1;
        for _ in 0..=15 {
            let n = (v * scale as f64).round();
            if n.abs() < 1e30 && n / scale as f64 == v {
                return Rational::new(n as i128, scale);
            }
            scale *= 10;
        }
        let mut den: i128 = 1;
        let mut x = v;
        for _ in 0..100 {
            if x.fract() == 0.0 {
                return Rational::new(x as i128, den);
            }
            x *= 2.0;
            den = den.checked_mul(2)?;
        }
        None
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn checked_add(self, o: Self) -> Option<Self> {
        let num = self.num.checked_mul(o.den)?.checked_add(o.num.checked_mul(self.den)?)?;
        Rational::new(num, self.den.checked_mul(o.den)?)
    }

    pub fn negated(self) -> Self {
        Rational { num: -self.num, den: self.den }
    }

    pub fn checked_mul(self, o: Self) -> Option<Self> {
        Rational::new(self.num.checked_mul(o.num)?, self.den.checked_mul(o.den)?)
    }

    pub fn recip(self) -> Option<Self> {
        Rational::new(self.den, self.num)
    }

    fn pow(self, p: i32) -> Option<Self> {
        let base = if p < 0 { self.recip()? } else { self };
        let mut acc = Rational::integer(1);
        for _ in 0..p.unsigned_abs() {
            acc = acc.checked_mul(base)?;
        }
        Some(acc)
    }

    fn sqrt(self) -> Option<Self> {
        Rational::new(isqrt(self.num)?, isqrt(self.den)?)
    }
}

/// Exact value of an expression at `xi`, when it is rational.
pub fn eval_rational(e: &Expr, xi: &[i64]) -> Option<Rational> {
    Some(match e {
        Expr::Num(v) => Rational::from_f64(*v)?,
        Expr::Xi(j) => Rational::integer(*xi.get(j - 1)? as i128),
        Expr::AbsXi => Rational::integer(isqrt(i128::try_from(norm_sq(xi)).ok()?)?),
        Expr::Neg(a) => eval_rational(a, xi)?.negated(),
        Expr::Add(a, b) => eval_rational(a, xi)?.checked_add(eval_rational(b, xi)?)?,
        Expr::Sub(a, b) => eval_rational(a, xi)?.checked_add(eval_rational(b, xi)?.negated())?,
        Expr::Mul(a, b) => eval_rational(a, xi)?.checked_mul(eval_rational(b, xi)?)?,
        Expr::Div(a, b) => eval_rational(a, xi)?.checked_mul(eval_rational(b, xi)?.recip()?)?,
        Expr::Pow(a, p) => {
            let base = eval_rational(a, xi)?;
            if p.fract() == 0.0 && p.abs() <= 256.0 {
                base.pow(*p as i32)?
            } else if *p == 0.5 {
                base.sqrt()?
            } else {
                return None;
            }
        }
        Expr::Sqrt(a) => eval_rational(a, xi)?.sqrt()?,
        Expr::Exp(a) => {
            if eval_rational(a, xi)?.is_zero() {
                Rational::integer(1)
            } else {
                return None;
            }
        }
    })
}

/// Complex rational `re + i im`.
pub type ComplexRational = (Rational, Rational);

pub fn is_gaussian_integer_real(z: &ComplexRational) -> bool {
    z.1.is_zero() && z.0.is_integer()
}

fn is_triangular(q: &MatrixSymbol) -> bool {
    let lower_zero = (0..q.m).all(|r| (0..r).all(|c| q.entries[r][c].is_zero()));
    let upper_zero = (0..q.m).all(|r| (r + 1..q.m).all(|c| q.entries[r][c].is_zero()));
    lower_zero || upper_zero
}

/// Exact time-averaged diagonal of a triangular symbol at `xi`, which is the
/// list of averaged eigenvalues. `None` unless every entry is rational.
pub fn exact_averaged_diagonal(q: &MatrixSymbol, xi: &[i64]) -> Option<Vec<ComplexRational>> {
    if !is_triangular(q) {
        return None;
    }
    (0..q.m)
        .map(|k| {
            let e = &q.entries[k][k];
            if e.is_zero() {
                return Some((Rational::integer(0), Rational::integer(0)));
            }
            let avg = e.time.average();
            let space = eval_rational(e.space.ast(), xi)?;
            Some((Rational::from_f64(avg.re)?.checked_mul(space)?, Rational::from_f64(avg.im)?.checked_mul(space)?))
        })
        .collect()
}

/// Exact verdict on whether the averaged eigenvalue closest to `approx` is a
/// real integer. `None` when the symbol gives no exact handle.
pub fn exact_integer_check(q: &MatrixSymbol, xi: &[i64], approx: num_complex::Complex64) -> Option<bool> {
    let diag = exact_averaged_diagonal(q, xi)?;
    let closest = diag.iter().min_by(|a, b| {
        let da = (num_complex::Complex64::new(a.0.to_f64(), a.1.to_f64()) - approx).norm();
        let db = (num_complex::Complex64::new(b.0.to_f64(), b.1.to_f64()) - approx).norm();
        da.total_cmp(&db)
    })?;
    let gap = (num_complex::Complex64::new(closest.0.to_f64(), closest.1.to_f64()) - approx).norm();
    (gap <= 1e-6 * (1.0 + approx.norm())).then(|| is_gaussian_integer_real(closest))
}

/// Number of exactly vanishing averaged diagonal entries, when decidable.
pub fn exact_zero_count(q: &MatrixSymbol, xi: &[i64]) -> Option<usize> {
    let diag = exact_averaged_diagonal(q, xi)?;
    Some(diag.iter().filter(|z| z.0.is_zero() && z.1.is_zero()).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::SpatialExpr;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn decimal_and_dyadic_literals() {
        assert_eq!(Rational::from_f64(0.1), Some(r(1, 10)));
        assert_eq!(Rational::from_f64(-2.5), Some(r(-5, 2)));
        let b0 = 0.5 + 0.25 + 2f64.powi(-6) + 2f64.powi(-24);
        let q = Rational::from_f64(b0).unwrap();
        assert!(q.checked_mul(Rational::integer(1 << 24)).unwrap().is_integer());
        assert!(!q.checked_mul(Rational::integer(1 << 23)).unwrap().is_integer());
    }

    #[test]
    fn expressions_evaluate_exactly() {
        let e = SpatialExpr::parse("0.1*xi1 + 2^-2*abs_xi").unwrap();
        assert_eq!(eval_rational(e.ast(), &[10]), Some(r(7, 2)));
        assert_eq!(eval_rational(e.ast(), &[-10]), Some(r(3, 2)));
        let s = SpatialExpr::parse("sqrt(2)*xi1").unwrap();
        assert_eq!(eval_rational(s.ast(), &[3]), None);
        let a = SpatialExpr::parse("abs_xi").unwrap();
        assert_eq!(eval_rational(a.ast(), &[3, 4]), Some(r(5, 1)));
        assert_eq!(eval_rational(a.ast(), &[1, 1]), None);
    }
}
