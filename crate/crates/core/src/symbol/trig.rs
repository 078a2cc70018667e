use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Finite Fourier series `c(t) = sum_k c_k e^{ikt}` on the circle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPolynomial {
    coeffs: BTreeMap<i64, Complex64>,
}

impl TrigPolynomial {
    /// Build from `(k, c_k)` pairs; repeated frequencies are summed and zero
    /// coefficients dropped.
    pub fn new<I: IntoIterator<Item = (i64, Complex64)>>(terms: I) -> Self {
        let mut coeffs = BTreeMap::new();
        for (k, c) in terms {
            *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        TrigPolynomial { coeffs }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new([(0, c)])
    }

    pub fn real_constant(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `a + b sin t`.
    pub fn sin_affine(a: f64, b: f64) -> Self {
        Self::new([
            (0, Complex64::new(a, 0.0)),
            (1, Complex64::new(0.0, -b / 2.0)),
            (-1, Complex64::new(0.0, b / 2.0)),
        ])
    }

    /// `a + b cos t`.
    pub fn cos_affine(a: f64, b: f64) -> Self {
        Self::new([
            (0, Complex64::new(a, 0.0)),
            (1, Complex64::new(b / 2.0, 0.0)),
            (-1, Complex64::new(b / 2.0, 0.0)),
        ])
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(&k, &c)| (k, c))
    }

    pub fn coefficient(&self, k: i64) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    /// Largest |k| present.
    pub fn degree(&self) -> u64 {
        self.coeffs.keys().map(|k| k.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.keys().all(|&k| k == 0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&k, &c)| c * Complex64::from_polar(1.0, k as f64 * t))
            .sum()
    }

    /// Mean over the period, read off exactly as the zero coefficient.
    pub fn average(&self) -> Complex64 {
        self.coefficient(0)
    }

    /// `alpha`-th t-derivative: coefficients multiplied by `(ik)^alpha`.
    pub fn derivative(&self, alpha: u32) -> Self {
        let i = Complex64::new(0.0, 1.0);
        Self::new(
            self.coeffs
                .iter()
                .map(|(&k, &c)| (k, c * (i * k as f64).powu(alpha))),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|(&k, &c)| (k, c * s)))
    }

    /// Values on the uniform grid `t_j = 2 pi j / len`.
    pub fn sample(&self, len: usize) -> Vec<Complex64> {
        (0..len)
            .map(|j| self.eval(2.0 * PI * j as f64 / len as f64))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrigRepr {
    fourier: Vec<(i64, [f64; 2])>,
}

impl Serialize for TrigPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TrigRepr {
            fourier: self.coeffs.iter().map(|(&k, c)| (k, [c.re, c.im])).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrigPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = TrigRepr::deserialize(d)?;
        Ok(TrigPolynomial::new(
            repr.fourier.into_iter().map(|(k, [re, im])| (k, Complex64::new(re, im))),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_is_zero_coefficient() {
        let p = TrigPolynomial::sin_affine(2.0, 1.0);
        assert_eq!(p.average(), Complex64::new(2.0, 0.0));
        let v = p.eval(PI / 2.0);
        assert!((v - Complex64::new(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let p = TrigPolynomial::sin_affine(0.0, 1.0).derivative(1);
        for j in 0..8 {
            let t = j as f64 * 0.7;
            assert!((p.eval(t) - Complex64::new(t.cos(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip() {
        let p = TrigPolynomial::new([(0, Complex64::new(1.0, 0.5)), (-2, Complex64::new(0.0, 3.0))]);
        let s = serde_json::to_string(&p).unwrap();
        let q: TrigPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
