//! Problem files and run parameters, resolved with deterministic defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{companion_operator, PerturbationSettings};
use crate::error::{Error, Result};
use crate::params::Tolerances;
use crate::symbol::{Lattice, MatrixSymbol, SpatialExpr, SymbolEntry, TimeGrid};
use crate::triangular::BranchOrder;

pub const DEFAULT_RADIUS: u64 = 256;
pub const DEFAULT_TGRID: usize = 64;
pub const DEFAULT_ALPHA_MAX: u32 = 4;
/// Frequencies with `max_j |xi_j|` up to this value are dumped by `triangularize`.
pub const DEFAULT_DUMP_RADIUS: u64 = 16;

/// Which diagnostic applies to the symbol.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `dt_plus_q` for `t`-independent symbols, `variable` otherwise.
    #[default]
    Auto,
    /// Invertibility of a constant matrix operator `L(D_x)` (no `D_t`).
    ConstantFull,
    /// `D_t + Q(D_x)` with `Q` independent of `t`.
    DtPlusQ,
    /// `D_t + Q(t, D_x)`.
    Variable,
}

/// A problem file as written on disk. The symbol is given either by
/// `entries` (an `m x m` array of separable entries) or by `coefficients`
/// `q_1, ..., q_m` of the scalar equation `D_t^m + sum_j q_j(D_x) D_t^{m-j}`,
/// which is reduced to a first-order system.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub m: Option<usize>,
    pub n: usize,
    #[serde(default)]
    pub entries: Option<Vec<Vec<SymbolEntry>>>,
    #[serde(default)]
    pub coefficients: Option<Vec<String>>,
    #[serde(default)]
    pub kind: ProblemKind,
    #[serde(default)]
    pub branch_order: Option<BranchOrder>,
    /// Entries of the perturbation `Q` in `L + eps Q`; `L` is the main symbol.
    #[serde(default)]
    pub perturbation: Option<Vec<Vec<SymbolEntry>>>,
    #[serde(default)]
    pub radius: Option<u64>,
    #[serde(default)]
    pub tgrid: Option<usize>,
    #[serde(default)]
    pub alpha_max: Option<u32>,
    #[serde(default)]
    pub dump_radius: Option<u64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon_eval: Option<f64>,
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Command-line overrides, applied after the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub radius: Option<u64>,
    pub tgrid: Option<usize>,
    pub alpha_max: Option<u32>,
    pub out: Option<PathBuf>,
    /// `NAME=VALUE` assignments.
    pub tol: Vec<String>,
    pub epsilon: Option<Vec<f64>>,
}

/// Fully resolved run configuration, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub name: Option<String>,
    pub kind: ProblemKind,
    pub symbol: MatrixSymbol,
    /// Scalar coefficients the symbol was reduced from, if any.
    pub coefficients: Option<Vec<String>>,
    pub perturbation: Option<MatrixSymbol>,
    pub branch_order: BranchOrder,
    pub radius: u64,
    pub tgrid: usize,
    pub alpha_max: u32,
    pub dump_radius: u64,
    pub tolerances: Tolerances,
    pub perturbation_settings: PerturbationSettings,
    pub out: PathBuf,
}

/// Parse a comma-separated list of numbers.
pub fn parse_list(src: &str) -> Result<Vec<f64>> {
    src.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("`{s}` is not a number"))))
        .collect()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn symbol(&self) -> Result<MatrixSymbol> {
        match (&self.entries, &self.coefficients) {
            (Some(entries), None) => {
                let m = self.m.unwrap_or(entries.len());
                MatrixSymbol::new(m, self.n, entries.clone())
            }
            (None, Some(coefs)) => {
                let exprs = coefs.iter().map(|s| SpatialExpr::parse(s)).collect::<Result<Vec<_>>>()?;
                let q = companion_operator(&exprs, self.n)?;
                if let Some(m) = self.m.filter(|&m| m != q.m) {
                    return Err(Error::DimensionMismatch(format!("m = {m} but {} coefficients were given", q.m)));
                }
                Ok(q)
            }
            (Some(_), Some(_)) => Err(Error::InvalidInput("give either `entries` or `coefficients`, not both".into())),
            (None, None) => Err(Error::InvalidInput("problem needs `entries` or `coefficients`".into())),
        }
    }

    /// Apply defaults, then the file's values, then `ov`.
    pub fn resolve(&self, ov: &Overrides) -> Result<RunConfig> {
        let symbol = self.symbol()?;
        let perturbation = match &self.perturbation {
            Some(p) => Some(MatrixSymbol::new(symbol.m, symbol.n, p.clone())?),
            None => None,
        };
        let mut tolerances = Tolerances::default();
        for (k, v) in &self.tolerances {
            tolerances.set(k, *v)?;
        }
        for a in &ov.tol {
            tolerances.apply_assignment(a)?;
        }
        let mut ps = PerturbationSettings::default();
        if let Some(e) = ov.epsilon.clone().or_else(|| self.epsilon.clone()) {
            ps.epsilon = e;
        }
        if let Some(e) = self.epsilon_eval {
            ps.epsilon_eval = e;
        }
        if let Some(d) = self.degree {
            ps.degree = d;
        }
        let kind = match self.kind {
            ProblemKind::Auto if symbol.is_time_independent() => ProblemKind::DtPlusQ,
            ProblemKind::Auto => ProblemKind::Variable,
            k => k,
        };
        if matches!(kind, ProblemKind::DtPlusQ | ProblemKind::ConstantFull) && !symbol.is_time_independent() {
            return Err(Error::InvalidInput(format!("kind {kind:?} needs a t-independent symbol")));
        }
        let cfg = RunConfig {
            name: self.name.clone(),
            kind,
            symbol,
            coefficients: self.coefficients.clone(),
            perturbation,
            branch_order: self.branch_order.unwrap_or_default(),
            radius: ov.radius.or(self.radius).unwrap_or(DEFAULT_RADIUS),
            tgrid: ov.tgrid.or(self.tgrid).unwrap_or(DEFAULT_TGRID),
            alpha_max: ov.alpha_max.or(self.alpha_max).unwrap_or(DEFAULT_ALPHA_MAX),
            dump_radius: self.dump_radius.unwrap_or(DEFAULT_DUMP_RADIUS),
            tolerances,
            perturbation_settings: ps,
            out: ov.out.clone().or_else(|| self.out.clone()).unwrap_or_else(|| PathBuf::from("hypo-lab-out")),
        };
        cfg.lattice()?;
        cfg.grid()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.symbol.n, self.radius)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.tgrid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAVE: &str = r#"{"n": 1, "coefficients": ["-2*abs_xi", "4*abs_xi^2"], "radius": 64,
        "tolerances": {"res_tol": 1e-9}}"#;

    #[test]
    fn file_values_then_overrides() {
        let file = ProblemFile::parse(WAVE).unwrap();
        let cfg = file.resolve(&Overrides::default()).unwrap();
        assert_eq!((cfg.radius, cfg.tgrid, cfg.kind), (64, DEFAULT_TGRID, ProblemKind::DtPlusQ));
        assert_eq!(cfg.symbol.m, 2);
        assert_eq!(cfg.tolerances.res_tol, 1e-9);
        let ov = Overrides { radius: Some(8), tol: vec!["res_tol=1e-7".into()], ..Default::default() };
        let cfg = file.resolve(&ov).unwrap();
        assert_eq!(cfg.radius, 8);
        assert_eq!(cfg.tolerances.res_tol, 1e-7);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(ProblemFile::parse(r#"{"n": 1}"#).unwrap().resolve(&Overrides::default()).is_err());
        assert!(ProblemFile::parse(r#"{"n": 1, "bogus": 2}"#).is_err());
        let bad_tol = r#"{"n": 1, "coefficients": ["xi1"], "tolerances": {"nope": 1}}"#;
        assert!(ProblemFile::parse(bad_tol).unwrap().resolve(&Overrides::default()).is_err());
        let bad_grid = r#"{"n": 1, "coefficients": ["xi1"], "tgrid": 48}"#;
        assert!(matches!(
            ProblemFile::parse(bad_grid).unwrap().resolve(&Overrides::default()),
            Err(Error::NonPowerOfTwo(48))
        ));
    }

    #[test]
    fn epsilon_lists() {
        assert_eq!(parse_list("-0.02, 0,0.02").unwrap(), vec![-0.02, 0.0, 0.02]);
        assert!(parse_list("0.1,x").is_err());
    }
}
