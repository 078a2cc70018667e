//! Verdict classes and the evidence attached to them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::triangular::smooth::ExcludedMode;
use crate::triangular::ConditionReport;

use super::fit::DiophantineFit;

/// Verdict class of a finite sweep. Every class is evidence, not proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "GH_consistent")]
    GhConsistent,
    #[serde(rename = "NonGH_resonant")]
    NonGhResonant,
    #[serde(rename = "NonGH_superpolynomial")]
    NonGhSuperpolynomial,
    Inconclusive,
}

impl Verdict {
    /// Precedence: resonant > superpolynomial > inconclusive > consistent.
    fn rank(self) -> u8 {
        match self {
            Verdict::GhConsistent => 0,
            Verdict::Inconclusive => 1,
            Verdict::NonGhSuperpolynomial => 2,
            Verdict::NonGhResonant => 3,
        }
    }

    pub fn worst(self, other: Verdict) -> Verdict {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::GhConsistent => "GH_consistent",
            Verdict::NonGhResonant => "NonGH_resonant",
            Verdict::NonGhSuperpolynomial => "NonGH_superpolynomial",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Fit of one eigenvalue branch, or why it could not be fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEvidence {
    pub branch: usize,
    /// Distance that was fitted, e.g. `siegel_distance(lambda_0)`.
    pub distance: String,
    pub verdict: Verdict,
    pub fit: Option<DiophantineFit>,
    /// Hypothesis on `Im lambda` used to transfer the verdict, if any.
    pub hypothesis: Option<String>,
    pub note: Option<String>,
}

impl BranchEvidence {
    pub fn from_fit(branch: usize, distance: &str, fit: crate::error::Result<DiophantineFit>) -> Self {
        match fit {
            Ok(f) => BranchEvidence {
                branch,
                distance: distance.to_string(),
                verdict: f.verdict,
                note: f.note.clone(),
                fit: Some(f),
                hypothesis: None,
            },
            Err(e) => BranchEvidence {
                branch,
                distance: distance.to_string(),
                verdict: Verdict::Inconclusive,
                fit: None,
                hypothesis: None,
                note: Some(e.to_string()),
            },
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        self.fit.as_ref().and_then(|f| f.exponent)
    }
}

/// Global-hypoellipticity verdict with its evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GHVerdict {
    pub verdict: Verdict,
    /// Criterion the verdict rests on.
    pub basis: String,
    pub branches: Vec<BranchEvidence>,
    /// Independent sufficient check (for instance a determinant bound).
    pub corroboration: Option<DiophantineFit>,
    /// Frequencies left out, with reasons (capped list, exact count).
    pub excluded: Vec<ExcludedMode>,
    pub excluded_count: u64,
    /// Frequencies where a spatial factor is undefined.
    pub undefined: Vec<Vec<i64>>,
    pub conditions: Option<ConditionReport>,
    pub notes: Vec<String>,
}

impl GHVerdict {
    pub fn new(basis: &str, branches: Vec<BranchEvidence>) -> Self {
        let verdict = branches.iter().fold(Verdict::GhConsistent, |v, b| v.worst(b.verdict));
        let verdict = if branches.is_empty() { Verdict::Inconclusive } else { verdict };
        GHVerdict {
            verdict,
            basis: basis.to_string(),
            branches,
            corroboration: None,
            excluded: Vec::new(),
            excluded_count: 0,
            undefined: Vec::new(),
            conditions: None,
            notes: Vec::new(),
        }
    }

    /// Largest fitted exponent over the branches.
    pub fn exponent(&self) -> Option<f64> {
        self.branches.iter().filter_map(|b| b.exponent()).reduce(f64::max)
    }

    /// Resonance witnesses of every branch, deduplicated.
    pub fn witnesses(&self) -> Vec<Vec<i64>> {
        let mut w: Vec<Vec<i64>> =
            self.branches.iter().filter_map(|b| b.fit.as_ref()).flat_map(|f| f.witnesses.iter().cloned()).collect();
        w.sort_by_cached_key(|x| (crate::symbol::lattice::norm_sq(x), x.clone()));
        w.dedup();
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_names() {
        use Verdict::*;
        assert_eq!(GhConsistent.worst(Inconclusive), Inconclusive);
        assert_eq!(NonGhSuperpolynomial.worst(Inconclusive), NonGhSuperpolynomial);
        assert_eq!(NonGhSuperpolynomial.worst(NonGhResonant), NonGhResonant);
        assert_eq!(serde_json::to_string(&NonGhResonant).unwrap(), "\"NonGH_resonant\"");
        let back: Verdict = serde_json::from_str("\"GH_consistent\"").unwrap();
        assert_eq!(back, GhConsistent);
    }
}
