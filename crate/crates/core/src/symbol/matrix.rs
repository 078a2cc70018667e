//! Matrix symbols `Q(t, xi)` with product-form entries `c_jk(t) q_jk(xi)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::symbol::expr::SpatialExpr;
use crate::symbol::trig::TrigPolynomial;

/// Largest supported matrix size.
pub const MAX_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolEntry {
    pub time: TrigPolynomial,
    pub space: SpatialExpr,
}

impl SymbolEntry {
    pub fn new(time: TrigPolynomial, space: &str) -> Result<Self> {
        Ok(SymbolEntry { time, space: SpatialExpr::parse(space)? })
    }

    pub fn zero() -> Self {
        SymbolEntry { time: TrigPolynomial::zero(), space: SpatialExpr::constant(0.0) }
    }

    /// Time-independent entry `q(xi)`.
    pub fn space_only(space: &str) -> Result<Self> {
        Self::new(TrigPolynomial::real_constant(1.0), space)
    }

    pub fn is_zero(&self) -> bool {
        self.time.is_zero() || self.space.is_zero()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixSymbol {
    pub m: usize,
    pub n: usize,
    pub entries: Vec<Vec<SymbolEntry>>,
}

#[derive(Deserialize)]
struct RawSymbol {
    m: usize,
    n: usize,
    entries: Vec<Vec<SymbolEntry>>,
}

impl<'de> Deserialize<'de> for MatrixSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSymbol::deserialize(d)?;
        MatrixSymbol::new(raw.m, raw.n, raw.entries).map_err(serde::de::Error::custom)
    }
}

/// Time coefficients of every entry sampled on a grid, row-major.
#[derive(Debug, Clone)]
pub struct TimeSamples {
    pub len: usize,
    values: Vec<Vec<Complex64>>,
    zero: Vec<bool>,
}

impl MatrixSymbol {
    pub fn new(m: usize, n: usize, entries: Vec<Vec<SymbolEntry>>) -> Result<Self> {
        if m == 0 || m > MAX_SIZE {
            return Err(Error::DimensionMismatch(format!("matrix size {m} not in 1..={MAX_SIZE}")));
        }
        if n == 0 || n > 9 {
            return Err(Error::DimensionMismatch(format!("spatial dimension {n} not in 1..=9")));
        }
        if entries.len() != m || entries.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch(format!("entries must form a {m}x{m} array")));
        }
        for row in &entries {
            for e in row {
                if e.space.max_component() > n {
                    return Err(Error::DimensionMismatch(format!(
                        "`{}` uses xi{} but n = {n}",
                        e.space,
                        e.space.max_component()
                    )));
                }
            }
        }
        Ok(MatrixSymbol { m, n, entries })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("symbol serializes")
    }

    /// Time-independent symbol from spatial expressions, row-major.
    pub fn constant(m: usize, n: usize, exprs: &[&str]) -> Result<Self> {
        if exprs.len() != m * m {
            return Err(Error::DimensionMismatch(format!("expected {} expressions", m * m)));
        }
        let entries = (0..m)
            .map(|j| (0..m).map(|k| SymbolEntry::space_only(exprs[j * m + k])).collect())
            .collect::<Result<_>>()?;
        MatrixSymbol::new(m, n, entries)
    }

    pub fn is_time_independent(&self) -> bool {
        self.entries.iter().flatten().all(|e| e.time.is_constant())
    }

    /// Replace every time coefficient by its average.
    pub fn averaged(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| SymbolEntry { time: TrigPolynomial::constant(e.time.average()), space: e.space.clone() })
                    .collect()
            })
            .collect();
        MatrixSymbol { m: self.m, n: self.n, entries }
    }

    pub fn negated(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| SymbolEntry { time: e.time.scale(Complex64::new(-1.0, 0.0)), space: e.space.clone() })
                    .collect()
            })
            .collect();
        MatrixSymbol { m: self.m, n: self.n, entries }
    }

    /// Spatial factors `q_jk(xi)`, row-major; zero entries are not evaluated.
    pub fn eval_space(&self, xi: &[i64]) -> Result<Vec<f64>> {
        if xi.len() != self.n {
            return Err(Error::DimensionMismatch(format!("xi has {} components, expected {}", xi.len(), self.n)));
        }
        self.entries
            .iter()
            .flatten()
            .map(|e| if e.is_zero() { Ok(0.0) } else { e.space.eval(xi) })
            .collect()
    }

    pub fn time_samples(&self, len: usize) -> TimeSamples {
        let entries: Vec<&SymbolEntry> = self.entries.iter().flatten().collect();
        TimeSamples {
            len,
            values: entries.iter().map(|e| e.time.sample(len)).collect(),
            zero: entries.iter().map(|e| e.is_zero()).collect(),
        }
    }

    /// `Q(t_j, xi)` for every grid point.
    pub fn sample_at(&self, xi: &[i64], ts: &TimeSamples) -> Result<Vec<CMat>> {
        let q = self.eval_space(xi)?;
        let m = self.m;
        Ok((0..ts.len)
            .map(|j| {
                DMatrix::from_fn(m, m, |r, c| {
                    let idx = r * m + c;
                    if ts.zero[idx] {
                        Complex64::new(0.0, 0.0)
                    } else {
                        ts.values[idx][j] * q[idx]
                    }
                })
            })
            .collect())
    }

    /// `Q(t, xi)` at a single time.
    pub fn eval(&self, t: f64, xi: &[i64]) -> Result<CMat> {
        let q = self.eval_space(xi)?;
        let m = self.m;
        Ok(DMatrix::from_fn(m, m, |r, c| {
            let e = &self.entries[r][c];
            if e.is_zero() {
                Complex64::new(0.0, 0.0)
            } else {
                e.time.eval(t) * q[r * m + c]
            }
        }))
    }

    /// `Q(xi)` of a time-independent symbol (averages of the time factors).
    pub fn eval_constant(&self, xi: &[i64]) -> Result<CMat> {
        let q = self.eval_space(xi)?;
        let m = self.m;
        Ok(DMatrix::from_fn(m, m, |r, c| {
            let e = &self.entries[r][c];
            if e.is_zero() {
                Complex64::new(0.0, 0.0)
            } else {
                e.time.average() * q[r * m + c]
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "m": 2, "n": 1,
        "entries": [
            [{"time": {"fourier": [[1, [0, -0.5]], [-1, [0, 0.5]]]}, "space": "1"},
             {"time": {"fourier": [[0, [1, 0]]]}, "space": "xi1"}],
            [{"time": {"fourier": [[0, [1, 0]]]}, "space": "xi1"},
             {"time": {"fourier": [[1, [0, -0.5]], [-1, [0, 0.5]]]}, "space": "1"}]
        ]
    }"#;

    #[test]
    fn parses_and_evaluates() {
        let q = MatrixSymbol::from_json(EXAMPLE).unwrap();
        let a = q.eval(1.0, &[3]).unwrap();
        assert!((a[(0, 0)].re - 1f64.sin()).abs() < 1e-15);
        assert_eq!(a[(0, 1)].re, 3.0);
        let back = MatrixSymbol::from_json(&q.to_json()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn rejects_wrong_shapes() {
        let bad = EXAMPLE.replace("\"m\": 2", "\"m\": 3");
        assert!(MatrixSymbol::from_json(&bad).is_err());
        let bad = EXAMPLE.replace("\"space\": \"xi1\"", "\"space\": \"xi2\"");
        assert!(MatrixSymbol::from_json(&bad).is_err());
    }
}
