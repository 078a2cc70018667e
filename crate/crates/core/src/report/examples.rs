//! Bundled example problems with closed-form or known expected outcomes.

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::diagnostics::{perturbation_track, Verdict};
use crate::error::{Error, Result};
use crate::triangular::{eigen_field, smooth_triangularize, BranchOrder, TriangularForm};

use super::commands::{run_diagnosis, RunOutput};
use super::config::{Overrides, ProblemFile, RunConfig};
use super::output::{Artifact, ErrorDetail, ExampleOutcome, RunReport, Timings, EXIT_MISMATCH};

/// `c0 + s1 sin t + c1 cos t` as a Fourier list.
fn trig(c0: f64, s1: f64, c1: f64) -> Value {
    json!({"fourier": [[0, [c0, 0.0]], [1, [0.5 * c1, -0.5 * s1]], [-1, [0.5 * c1, 0.5 * s1]]]})
}

fn constant(space: &str) -> Value {
    json!({"time": trig(1.0, 0.0, 0.0), "space": space})
}

fn zero() -> Value {
    json!({"time": trig(0.0, 0.0, 0.0), "space": "0"})
}

/// `Q = [[a, b xi], [b xi, a]]` with `a = a0 + a1 sin t`, `b = b0 + b1 cos t`.
fn triangular_example(name: &str, a: (f64, f64), b: (f64, f64), radius: u64) -> Value {
    let at = trig(a.0, a.1, 0.0);
    let bt = trig(b.0, 0.0, b.1);
    json!({
        "name": name, "n": 1, "radius": radius, "branch_order": "oriented",
        "entries": [
            [{"time": at, "space": "1"}, {"time": bt, "space": "xi1"}],
            [{"time": bt, "space": "xi1"}, {"time": at, "space": "1"}]
        ]
    })
}

/// What a bundled example must produce.
#[derive(Debug, Clone)]
pub enum Check {
    Verdict { expected: Verdict, exponent: Option<(f64, f64)> },
    /// `S = [[1,0],[1,1]]`, `Lambda = diag(a + b xi, a - b xi)`,
    /// `N_12 = b xi`, `B = 0` and residual below the bound.
    ConstantFrame { b: (f64, f64), a: (f64, f64), max_residual: f64 },
    /// `B = (a' sqrt(p) / (a^2 xi)) [[0,0],[i,0]]` entrywise to the bound,
    /// with `a = 2 + sin t` and `p = exp(-xi^2)`.
    DecayingTwist { max_error: f64 },
    /// `sigma_1 = 0` and `sigma_2 = q^2 / (2 lambda(0))` with `q = 1/(1 + |l|)`.
    OppositePerturbation { sigma1: f64, sigma2_relative: f64 },
    /// `sigma_1 = kappa`, higher coefficients zero, to the bound.
    CommutingPerturbation { max_error: f64 },
}

#[derive(Debug, Clone)]
pub struct Example {
    pub name: &'static str,
    pub problem: Value,
    pub check: Check,
}

impl Example {
    pub fn default_radius(&self) -> u64 {
        self.problem["radius"].as_u64().unwrap_or(super::config::DEFAULT_RADIUS)
    }
}

/// The bundled suite.
pub fn suite() -> Vec<Example> {
    let sqrt2 = std::f64::consts::SQRT_2;
    vec![
        Example {
            name: "triangular_example_frame",
            problem: triangular_example("triangular_example_frame", (0.0, 1.0), (sqrt2, 0.5), 64),
            check: Check::ConstantFrame { a: (0.0, 1.0), b: (sqrt2, 0.5), max_residual: 1e-12 },
        },
        Example {
            name: "decaying_coupling_twist",
            problem: json!({
                "name": "decaying_coupling_twist", "n": 1, "radius": 64, "branch_order": "oriented",
                "entries": [
                    [zero(), {"time": {"fourier": [[0, [4.5, 0.0]], [1, [0.0, -2.0]], [-1, [0.0, 2.0]],
                                                   [2, [-0.25, 0.0]], [-2, [-0.25, 0.0]]]}, "space": "xi1^2"}],
                    [constant("exp(-xi1^2)"), zero()]
                ]
            }),
            check: Check::DecayingTwist { max_error: 1e-9 },
        },
        Example {
            name: "wave_complex_roots",
            problem: json!({"name": "wave_complex_roots", "n": 1, "radius": 256,
                            "coefficients": ["-2*abs_xi", "4*abs_xi^2"]}),
            check: Check::Verdict { expected: Verdict::GhConsistent, exponent: None },
        },
        Example {
            name: "wave_equal_coefficients",
            problem: json!({"name": "wave_equal_coefficients", "n": 1, "radius": 256,
                            "coefficients": ["-2*abs_xi", "abs_xi^2"]}),
            check: Check::Verdict { expected: Verdict::NonGhResonant, exponent: None },
        },
        Example {
            name: "commuting_sum",
            problem: json!({"name": "commuting_sum", "n": 2, "radius": 32, "entries": [
                [constant("sqrt(2)*xi2"), constant("xi1 + sqrt(3)*xi2")],
                [constant("xi1 + sqrt(3)*xi2"), constant("sqrt(2)*xi2")]
            ]}),
            check: Check::Verdict { expected: Verdict::NonGhResonant, exponent: None },
        },
        Example {
            name: "irrational_average",
            problem: triangular_example("irrational_average", (0.0, 1.0), (sqrt2, 0.5), 256),
            check: Check::Verdict { expected: Verdict::GhConsistent, exponent: Some((0.8, 1.2)) },
        },
        Example {
            name: "integer_average",
            problem: triangular_example("integer_average", (0.0, 1.0), (1.0, 0.5), 256),
            check: Check::Verdict { expected: Verdict::NonGhResonant, exponent: None },
        },
        Example {
            name: "time_factor_times_constant_symbol",
            problem: json!({"name": "time_factor_times_constant_symbol", "n": 1, "radius": 256, "entries": [
                [{"time": trig(2.0, 1.0, 0.0), "space": "sqrt(2)*xi1"}, {"time": trig(2.0, 1.0, 0.0), "space": "1"}],
                [zero(), {"time": trig(2.0, 1.0, 0.0), "space": "sqrt(3)*xi1"}]
            ]}),
            check: Check::Verdict { expected: Verdict::GhConsistent, exponent: None },
        },
        Example {
            name: "opposite_eigenvalue_perturbation",
            problem: json!({"name": "opposite_eigenvalue_perturbation", "n": 1, "radius": 32,
                "epsilon": [-0.04, -0.02, -0.01, 0.01, 0.02, 0.04], "degree": 4,
                "entries": [[constant("-xi1"), zero()], [zero(), constant("xi1")]],
                "perturbation": [[zero(), constant("1/(1 + abs_xi)")], [constant("1/(1 + abs_xi)"), zero()]]}),
            check: Check::OppositePerturbation { sigma1: 1e-8, sigma2_relative: 1e-6 },
        },
        Example {
            name: "commuting_perturbation",
            problem: json!({"name": "commuting_perturbation", "n": 1, "radius": 32,
                "entries": [[constant("xi1"), constant("1")], [constant("1"), constant("xi1")]],
                "perturbation": [[zero(), constant("1")], [constant("1"), zero()]]}),
            check: Check::CommutingPerturbation { max_error: 1e-10 },
        },
    ]
}

fn triangularize(cfg: &RunConfig) -> Result<TriangularForm> {
    let field = eigen_field(&cfg.symbol, &cfg.lattice()?, &cfg.grid()?, BranchOrder::Oriented, &cfg.tolerances)?;
    let form = smooth_triangularize(&field, &cfg.symbol, &cfg.tolerances)?;
    form.require_complete()?;
    Ok(form)
}

fn max_dev<'a>(pairs: impl Iterator<Item = (&'a Complex64, Complex64)>) -> f64 {
    pairs.map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Run one example; `Ok((observed, passed))`.
fn evaluate(ex: &Example, cfg: &RunConfig, reduced: bool) -> Result<(String, bool)> {
    let ts = cfg.grid()?.points();
    match &ex.check {
        Check::Verdict { expected, exponent } => {
            let v = match run_diagnosis(cfg, &cfg.lattice()?) {
                Ok(v) => v,
                Err(Error::InsufficientData { .. }) if reduced => return Ok(("Inconclusive".into(), true)),
                Err(e) => return Err(e),
            };
            let m = v.exponent();
            let observed = match m {
                Some(m) => format!("{} (M = {m:.3})", v.verdict),
                None => v.verdict.to_string(),
            };
            let in_range = match (exponent, m) {
                (Some((lo, hi)), Some(m)) => reduced || (*lo..=*hi).contains(&m),
                (Some(_), None) => reduced,
                (None, _) => true,
            };
            let ok = (v.verdict == *expected && in_range) || (reduced && v.verdict == Verdict::Inconclusive);
            Ok((observed, ok))
        }
        Check::ConstantFrame { a, b, max_residual } => {
            let form = triangularize(cfg)?;
            let mut dev = 0.0f64;
            for f in form.modes.iter().filter(|f| f.xi[0] != 0) {
                let xi = f.xi[0] as f64;
                for (j, &t) in ts.iter().enumerate() {
                    let (av, bv) = (a.0 + a.1 * t.sin(), b.0 + b.1 * t.cos());
                    let s = [1.0, 0.0, 1.0, 1.0];
                    dev = dev.max(max_dev(f.s[j].transpose().iter().zip(s.map(|x| Complex64::new(x, 0.0)))));
                    dev = dev.max((f.lambda[0][j] - (av + bv * xi)).norm() / (1.0 + xi.abs()));
                    dev = dev.max((f.lambda[1][j] - (av - bv * xi)).norm() / (1.0 + xi.abs()));
                    dev = dev.max((f.n[j][(0, 1)] - bv * xi).norm() / (1.0 + xi.abs()));
                }
            }
            let twist = form.modes.iter().flat_map(|f| &f.b).flat_map(|b| b.iter()).map(|z| z.norm()).fold(0.0, f64::max);
            let ok = form.max_residual < *max_residual && twist == 0.0 && dev < 1e-12;
            Ok((format!("residual {:.1e}, max |B| {twist:.1e}, closed-form deviation {dev:.1e}", form.max_residual), ok))
        }
        Check::DecayingTwist { max_error } => {
            let form = triangularize(cfg)?;
            let mut err = 0.0f64;
            for f in form.modes.iter().filter(|f| f.xi[0] != 0) {
                let xi = f.xi[0] as f64;
                let sp = (-xi * xi).exp().sqrt();
                for (j, &t) in ts.iter().enumerate() {
                    let a = 2.0 + t.sin();
                    let expect = [
                        Complex64::new(0.0, 0.0),
                        Complex64::new(0.0, 0.0),
                        Complex64::new(0.0, t.cos() * sp / (a * a * xi)),
                        Complex64::new(0.0, 0.0),
                    ];
                    err = err.max(max_dev(f.b[j].transpose().iter().zip(expect)));
                }
            }
            Ok((format!("max entrywise error {err:.1e} over {} modes", form.modes.len()), err < *max_error))
        }
        Check::OppositePerturbation { sigma1, sigma2_relative } => {
            let q = cfg.perturbation.as_ref().ok_or_else(|| Error::InvalidInput("missing perturbation".into()))?;
            let (fit, _) = perturbation_track(&cfg.symbol, q, &cfg.perturbation_settings, &cfg.lattice()?, &cfg.tolerances)?;
            let (mut e1, mut e2) = (0.0f64, 0.0f64);
            for p in fit.points.iter().filter(|p| p.eta[0] != 0) {
                let qv = 1.0 / (1.0 + p.eta[0].abs() as f64);
                for j in 0..2 {
                    let s2 = qv * qv / (2.0 * p.lambda[j].re);
                    e1 = e1.max(p.sigma[j][1].norm());
                    e2 = e2.max((p.sigma[j][2] - s2).norm() / s2.abs());
                }
            }
            let ok = e1 < *sigma1 && e2 < *sigma2_relative && !fit.points.is_empty();
            Ok((format!("max |sigma_1| {e1:.1e}, max relative sigma_2 error {e2:.1e}"), ok))
        }
        Check::CommutingPerturbation { max_error } => {
            let q = cfg.perturbation.as_ref().ok_or_else(|| Error::InvalidInput("missing perturbation".into()))?;
            let (fit, _) = perturbation_track(&cfg.symbol, q, &cfg.perturbation_settings, &cfg.lattice()?, &cfg.tolerances)?;
            let mut err = 0.0f64;
            for p in &fit.points {
                for j in 0..2 {
                    // lambda = xi + kappa with kappa = +-1 the eigenvalue of Q on the same vector.
                    let kappa = p.lambda[j].re - p.eta[0] as f64;
                    err = err.max((p.sigma[j][1] - kappa).norm());
                    err = err.max(p.sigma[j][2..].iter().map(|s| s.norm()).fold(0.0, f64::max));
                }
            }
            let exact = fit.points.iter().all(|p| p.exact);
            Ok((format!("linear-law error {err:.1e}, all points exact: {exact}"), err < *max_error && exact))
        }
    }
}

fn expected_label(c: &Check) -> String {
    match c {
        Check::Verdict { expected, exponent: Some((lo, hi)) } => format!("{expected} with M in [{lo}, {hi}]"),
        Check::Verdict { expected, .. } => expected.to_string(),
        Check::ConstantFrame { max_residual, .. } => format!("constant frame, B = 0, residual < {max_residual:e}"),
        Check::DecayingTwist { max_error } => format!("closed-form twist to {max_error:e}"),
        Check::OppositePerturbation { sigma1, sigma2_relative } => {
            format!("|sigma_1| < {sigma1:e}, sigma_2 relative error < {sigma2_relative:e}")
        }
        Check::CommutingPerturbation { max_error } => format!("exact linear law to {max_error:e}"),
    }
}

/// Run every example. A `radius` override below an example's own radius
/// allows `Inconclusive` in place of a definite verdict, but never the
/// opposite verdict.
pub fn run_suite(ov: &Overrides) -> Vec<ExampleOutcome> {
    suite()
        .iter()
        .map(|ex| {
            let reduced = ov.radius.is_some_and(|r| r < ex.default_radius());
            let overrides = Overrides { out: None, ..ov.clone() };
            let result = ProblemFile::parse(&ex.problem.to_string())
                .and_then(|p| p.resolve(&overrides))
                .and_then(|cfg| evaluate(ex, &cfg, reduced));
            let (observed, passed) = match result {
                Ok(r) => r,
                Err(e) => (format!("error {}: {e}", e.kind()), false),
            };
            ExampleOutcome { name: ex.name.into(), expected: expected_label(&ex.check), observed, passed }
        })
        .collect()
}

/// The `examples` command: run the suite and report the pass/fail matrix.
/// Any mismatch sets exit code [`EXIT_MISMATCH`].
pub fn cmd_examples(ov: &Overrides) -> RunOutput {
    let mut timings = Timings::new();
    let outcomes = timings.time("examples", || run_suite(ov));
    let mut report = RunReport::with_config("examples", None);
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name.as_str()).collect();
    if !failed.is_empty() {
        report.error = Some(ErrorDetail {
            error: "ExampleMismatch",
            message: format!("{} of {} examples failed: {}", failed.len(), outcomes.len(), failed.join(", ")),
            exit_code: EXIT_MISMATCH,
            witnesses: Vec::new(),
        });
    }
    let mut problems = Vec::new();
    for ex in suite() {
        match Artifact::json(&format!("problems/{}.json", ex.name), &ex.problem) {
            Ok(a) => problems.push(a),
            Err(e) => report.warnings.push(format!("could not serialize {}: {e}", ex.name)),
        }
    }
    report.examples = Some(outcomes);
    RunOutput { report, artifacts: problems, timings }
}

/// Render the pass/fail matrix as aligned text.
pub fn matrix(outcomes: &[ExampleOutcome]) -> String {
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    outcomes
        .iter()
        .map(|o| {
            let mark = if o.passed { "PASS" } else { "FAIL" };
            format!("{mark}  {:width$}  expected {}; observed {}\n", o.name, o.expected, o.observed)
        })
        .collect()
}
