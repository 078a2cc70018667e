use hypolab::diagnostics::{
    companion_operator, diagnose_constant_full, diagnose_dt_plus_q, diagnose_variable, min_tau_distance,
    perturbation_track, PerturbationSettings, VariableSettings, Verdict,
};
use hypolab::symbol::{Lattice, MatrixSymbol, SpatialExpr, SymbolEntry, TrigPolynomial};
use hypolab::Tolerances;
use num_complex::Complex64;

fn lattice(dim: usize, r: u64) -> Lattice {
    Lattice::new(dim, r).unwrap()
}

fn exprs(src: &[&str]) -> Vec<SpatialExpr> {
    src.iter().map(|s| SpatialExpr::parse(s).unwrap()).collect()
}

fn triangular_example(a: TrigPolynomial, b: TrigPolynomial) -> MatrixSymbol {
    let e = |t: &TrigPolynomial, s: &str| SymbolEntry::new(t.clone(), s).unwrap();
    MatrixSymbol::new(2, 1, vec![vec![e(&a, "1"), e(&b, "xi1")], vec![e(&b, "xi1"), e(&a, "1")]]).unwrap()
}

#[test]
fn constant_full_bounded_eigenvalues() {
    let l = MatrixSymbol::constant(2, 2, &["1", "0", "0", "1 + abs_xi^2"]).unwrap();
    let v = diagnose_constant_full(&l, &lattice(2, 64), &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::GhConsistent);
    assert_eq!(v.exponent(), Some(0.0));
    assert_eq!(v.corroboration.unwrap().verdict, Verdict::GhConsistent);
}

#[test]
fn constant_full_exponentially_small_eigenvalue() {
    let l = MatrixSymbol::constant(2, 1, &["exp(-abs_xi)", "0", "0", "1"]).unwrap();
    let v = diagnose_constant_full(&l, &lattice(1, 256), &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::NonGhSuperpolynomial);
}

#[test]
fn constant_full_singular_on_a_line() {
    let l = MatrixSymbol::constant(1, 2, &["xi1 - xi2"]).unwrap();
    let v = diagnose_constant_full(&l, &lattice(2, 32), &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::NonGhResonant);
    let w = v.witnesses();
    assert!(!w.is_empty());
    assert!(w.iter().all(|p| p[0] == p[1]));
}

#[test]
fn wave_operator_with_complex_roots_is_consistent() {
    let q = companion_operator(&exprs(&["-2*abs_xi", "4*abs_xi^2"]), 1).unwrap();
    let v = diagnose_dt_plus_q(&q, &lattice(1, 256), &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::GhConsistent);
    // Only the origin, where both roots vanish, is resonant.
    assert_eq!(v.witnesses(), vec![vec![0]]);
}

#[test]
fn wave_operator_with_equal_coefficients_resonates_everywhere() {
    let q = companion_operator(&exprs(&["-2*abs_xi", "abs_xi^2"]), 1).unwrap();
    let v = diagnose_dt_plus_q(&q, &lattice(1, 64), &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::NonGhResonant);
    let fit = v.branches[0].fit.as_ref().unwrap();
    assert_eq!(fit.witness_count, 129);
}

#[test]
fn commuting_sum_resonates_on_the_first_axis() {
    // Q(xi) = A1 xi1 + A2 xi2 with A1 = [[0,1],[1,0]], A2 = sqrt2 I + sqrt3 A1:
    // kappa = +-xi1 + (sqrt2 +- sqrt3) xi2, so min_tau |tau + kappa| = dist((sqrt2 +- sqrt3) xi2, Z)
    // vanishes exactly on xi2 = 0.
    let q = MatrixSymbol::constant(
        2,
        2,
        &["sqrt(2)*xi2", "xi1 + sqrt(3)*xi2", "xi1 + sqrt(3)*xi2", "sqrt(2)*xi2"],
    )
    .unwrap();
    let l = lattice(2, 32);
    let v = diagnose_dt_plus_q(&q, &l, &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::NonGhResonant);
    assert!(v.witnesses().iter().all(|p| p[1] == 0));
    let oracle: usize = (-32..=32).count();
    assert_eq!(v.branches[0].fit.as_ref().unwrap().witness_count as usize, oracle);
}

#[test]
fn dt_plus_q_is_invariant_under_unitary_conjugation() {
    // Rotation by 30 degrees conjugating diag(sqrt2 xi, sqrt3 xi).
    let (c, s) = (3f64.sqrt() / 2.0, 0.5);
    let (a, b) = (2f64.sqrt(), 3f64.sqrt());
    let m00 = format!("{}*xi1", a * c * c + b * s * s);
    let m01 = format!("{}*xi1", (b - a) * c * s);
    let m11 = format!("{}*xi1", a * s * s + b * c * c);
    let rotated = MatrixSymbol::constant(2, 1, &[&m00, &m01, &m01, &m11]).unwrap();
    let diagonal = MatrixSymbol::constant(2, 1, &["sqrt(2)*xi1", "0", "0", "sqrt(3)*xi1"]).unwrap();
    let l = lattice(1, 1024);
    let tol = Tolerances::default();
    let v1 = diagnose_dt_plus_q(&rotated, &l, &tol).unwrap();
    let v2 = diagnose_dt_plus_q(&diagonal, &l, &tol).unwrap();
    assert_eq!(v1.verdict, v2.verdict);
    assert!((v1.exponent().unwrap() - v2.exponent().unwrap()).abs() < 0.05);
}

#[test]
fn exact_recheck_confirms_rational_resonances() {
    // b0 = 1/2 + 1/4 + 2^-6 + 2^-24; b0 xi is an integer exactly at multiples of 2^24,
    // far outside the lattice, so only the origin is a witness.
    let q = MatrixSymbol::constant(1, 1, &["(2^-1 + 2^-2 + 2^-6 + 2^-24)*xi1"]).unwrap();
    let v = diagnose_dt_plus_q(&q, &lattice(1, 4096), &Tolerances::default()).unwrap();
    assert_eq!(v.witnesses(), vec![vec![0]]);
    // 0.1 xi is an integer at multiples of 10 even though 0.1 is not a double.
    let q = MatrixSymbol::constant(1, 1, &["0.1*xi1"]).unwrap();
    let v = diagnose_dt_plus_q(&q, &lattice(1, 100), &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::NonGhResonant);
    assert_eq!(v.branches[0].fit.as_ref().unwrap().witness_count, 21);
}

#[test]
fn variable_example_with_irrational_average_is_consistent() {
    let sqrt2 = 2f64.sqrt();
    let q = triangular_example(TrigPolynomial::sin_affine(0.0, 1.0), TrigPolynomial::cos_affine(sqrt2, 0.5));
    let v = diagnose_variable(&q, &lattice(1, 256), &VariableSettings::default(), &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::GhConsistent, "{:?}", v.notes);
    let m = v.exponent().unwrap();
    assert!((0.8..=1.2).contains(&m), "M = {m}");
    assert!(v.conditions.as_ref().unwrap().strongly_triangularizable());
}

#[test]
fn variable_example_with_integer_average_is_resonant() {
    let q = triangular_example(TrigPolynomial::sin_affine(0.0, 1.0), TrigPolynomial::cos_affine(1.0, 0.5));
    let v = diagnose_variable(&q, &lattice(1, 64), &VariableSettings::default(), &Tolerances::default()).unwrap();
    assert_eq!(v.verdict, Verdict::NonGhResonant);
    let tol = Tolerances::default();
    for w in v.witnesses() {
        // lambda_0 = +-xi exactly.
        let l0 = Complex64::new(w[0] as f64, 0.0);
        assert!(min_tau_distance(l0) <= tol.res_tol);
    }
}

#[test]
fn time_factor_times_constant_matrix_matches_its_average() {
    let c = TrigPolynomial::sin_affine(2.0, 1.0);
    let e = |t: &TrigPolynomial, s: &str| SymbolEntry::new(t.clone(), s).unwrap();
    let q = MatrixSymbol::new(
        2,
        1,
        vec![vec![e(&c, "sqrt(2)*xi1"), e(&c, "1")], vec![SymbolEntry::zero(), e(&c, "sqrt(3)*xi1")]],
    )
    .unwrap();
    let averaged = MatrixSymbol::constant(2, 1, &["2*sqrt(2)*xi1", "2", "0", "2*sqrt(3)*xi1"]).unwrap();
    let l = lattice(1, 256);
    let tol = Tolerances::default();
    let var = diagnose_variable(&q, &l, &VariableSettings::default(), &tol).unwrap();
    let avg = diagnose_dt_plus_q(&averaged, &l, &tol).unwrap();
    assert_eq!(var.verdict, avg.verdict);
    assert_eq!(var.verdict, Verdict::GhConsistent);
}

#[test]
fn perturbation_of_opposite_eigenvalues() {
    let l = MatrixSymbol::constant(2, 1, &["-xi1", "0", "0", "xi1"]).unwrap();
    let q = MatrixSymbol::constant(2, 1, &["0", "1/(1 + abs_xi)", "1/(1 + abs_xi)", "0"]).unwrap();
    let tol = Tolerances::default();
    let (fit, verdict) =
        perturbation_track(&l, &q, &PerturbationSettings::default(), &lattice(1, 32), &tol).unwrap();
    assert_eq!(verdict.verdict, Verdict::GhConsistent);
    for p in &fit.points {
        let ell = p.eta[0].abs() as f64;
        if ell == 0.0 {
            assert!(p.exact);
            continue;
        }
        let qv = 1.0 / (1.0 + ell);
        // Branch 0 is -|ell|.
        let s2 = -qv * qv / (2.0 * ell);
        assert!((p.sigma[0][0] - p.lambda[0]).norm() <= 1e-9 * (1.0 + ell));
        assert!(p.sigma[0][1].norm() < 1e-9, "{:?}", p.sigma[0]);
        assert!(((p.sigma[0][2].re - s2) / s2).abs() < 1e-6, "ell {ell}: {} vs {s2}", p.sigma[0][2].re);
        assert!(((p.sigma[1][2].re + s2) / s2).abs() < 1e-6);
    }
}

#[test]
fn commuting_perturbation_follows_the_linear_law() {
    let l = MatrixSymbol::constant(2, 1, &["xi1", "1", "1", "xi1"]).unwrap();
    let q = MatrixSymbol::constant(2, 1, &["0", "1", "1", "0"]).unwrap();
    let (fit, _) =
        perturbation_track(&l, &q, &PerturbationSettings::default(), &lattice(1, 32), &Tolerances::default())
            .unwrap();
    for p in &fit.points {
        assert!(p.exact);
        for j in 0..2 {
            // Eigenvalue xi + 1 pairs with kappa = 1, xi - 1 with kappa = -1.
            let kappa = p.sigma[j][0].re - p.eta[0] as f64;
            assert!((p.sigma[j][1].re - kappa).abs() < 1e-12);
            assert!(p.sigma[j][2..].iter().all(|s| s.norm() == 0.0));
        }
    }
}

#[test]
fn zero_perturbation_has_no_higher_coefficients() {
    let l = MatrixSymbol::constant(2, 1, &["xi1", "1", "0", "2*xi1 + 1"]).unwrap();
    let q = MatrixSymbol::constant(2, 1, &["0", "0", "0", "0"]).unwrap();
    let (fit, _) =
        perturbation_track(&l, &q, &PerturbationSettings::default(), &lattice(1, 16), &Tolerances::default())
            .unwrap();
    assert!(fit.points.iter().all(|p| p.sigma.iter().all(|s| s[1..].iter().all(|c| c.norm() == 0.0))));
}

#[test]
fn perturbation_grid_must_be_symmetric_and_small() {
    let l = MatrixSymbol::constant(1, 1, &["xi1"]).unwrap();
    let q = MatrixSymbol::constant(1, 1, &["1"]).unwrap();
    let tol = Tolerances::default();
    let lat = lattice(1, 16);
    let mut s = PerturbationSettings::default();
    s.epsilon = vec![0.01, 0.02, -0.01, 0.03, -0.03];
    assert!(perturbation_track(&l, &q, &s, &lat, &tol).is_err());
    s.epsilon = vec![-0.2, 0.2];
    assert!(perturbation_track(&l, &q, &s, &lat, &tol).is_err());
}
