use std::f64::consts::{PI, SQRT_2};

use hypolab::diagnostics::{diagnose_variable, VariableSettings, Verdict};
use hypolab::fourier::{classify_decay, DecayClass, ModeTable};
use hypolab::solver::{branch_table, build_nonsmooth_solution, solve_full, solve_periodic_mode, Formula};
use hypolab::symbol::{Lattice, MatrixSymbol, SymbolEntry, TimeGrid, TrigPolynomial};
use hypolab::triangular::{eigen_field, BranchOrder};
use hypolab::Tolerances;
use num_complex::Complex64;

fn triangular_example(a: TrigPolynomial, b: TrigPolynomial) -> MatrixSymbol {
    let e = |t: &TrigPolynomial, s: &str| SymbolEntry::new(t.clone(), s).unwrap();
    MatrixSymbol::new(2, 1, vec![vec![e(&a, "1"), e(&b, "xi1")], vec![e(&b, "xi1"), e(&a, "1")]]).unwrap()
}

fn smooth_rhs(t_len: usize, r: i64, components: usize) -> ModeTable {
    let pts: Vec<Vec<i64>> = (-r..=r).map(|x| vec![x]).collect();
    let mut f = ModeTable::new(t_len, 1, components).unwrap();
    for xi in pts {
        let decay = (-(xi[0].abs() as f64)).exp();
        let rows = (0..components)
            .map(|c| {
                (0..t_len)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / t_len as f64;
                        Complex64::from_polar(decay, (c as f64 + 1.0) * t) + Complex64::new(decay * t.cos(), 0.0)
                    })
                    .collect()
            })
            .collect();
        f.insert(xi, rows).unwrap();
    }
    f
}

#[test]
fn full_solve_of_the_triangular_example() {
    let tol = Tolerances::default();
    let q = triangular_example(TrigPolynomial::sin_affine(0.0, 1.0), TrigPolynomial::cos_affine(SQRT_2, 0.5));
    let f = smooth_rhs(128, 32, 2);
    let sol = solve_full(&q, &f, BranchOrder::Modulus, &tol).unwrap();
    // Only the origin has a zero average.
    let skipped: Vec<_> = sol.skipped.iter().map(|s| (s.xi.clone(), s.reason.clone())).collect();
    assert_eq!(skipped, vec![(vec![0], "Resonant".to_string())]);
    assert!(sol.max_residual() < 1e-8, "{}", sol.max_residual());
    // The eigenvectors are constant, so the twist vanishes.
    assert!(sol.records.iter().all(|r| r.iterations == 0));
    let report = classify_decay(&sol.v, 2, &Lattice::new(1, 32).unwrap(), &tol).unwrap();
    assert_eq!(report.class, DecayClass::Smooth);
}

#[test]
fn zero_right_hand_side_gives_zero() {
    let tol = Tolerances::default();
    let q = triangular_example(TrigPolynomial::sin_affine(0.0, 1.0), TrigPolynomial::cos_affine(SQRT_2, 0.5));
    let mut f = smooth_rhs(64, 8, 2);
    for rows in f.data.values_mut() {
        rows.iter_mut().flatten().for_each(|z| *z = Complex64::new(0.0, 0.0));
    }
    let sol = solve_full(&q, &f, BranchOrder::Modulus, &tol).unwrap();
    assert!(sol.v.data.values().flatten().flatten().all(|z| z.norm() == 0.0));
}

#[test]
fn scalar_full_solve_matches_the_mode_solver() {
    let tol = Tolerances::default();
    let q = MatrixSymbol::new(1, 1, vec![vec![SymbolEntry::new(TrigPolynomial::sin_affine(1.0, 0.5), "xi1 + 0.3").unwrap()]])
        .unwrap();
    let f = smooth_rhs(64, 6, 1);
    let sol = solve_full(&q, &f, BranchOrder::Modulus, &tol).unwrap();
    assert!(sol.skipped.is_empty());
    for (xi, rows) in &f.data {
        let lambda: Vec<Complex64> =
            (0..64).map(|j| Complex64::new((1.0 + 0.5 * (2.0 * PI * j as f64 / 64.0).sin()) * (xi[0] as f64 + 0.3), 0.0)).collect();
        let direct = solve_periodic_mode(&lambda, &rows[0], &tol).unwrap();
        let got = &sol.v.data[xi][0];
        let diff = got.iter().zip(&direct.v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-13 * (1.0 + direct.v.iter().map(|z| z.norm()).fold(0.0, f64::max)), "{xi:?}: {diff}");
    }
}

#[test]
fn dissipative_rows_choose_the_admissible_formula() {
    let tol = Tolerances::default();
    let len = 64;
    let ts: Vec<f64> = (0..len).map(|j| 2.0 * PI * j as f64 / len as f64).collect();
    let g: Vec<Complex64> = ts.iter().map(|&t| Complex64::from_polar(1.0, 2.0 * t)).collect();
    let up: Vec<Complex64> = ts.iter().map(|t| Complex64::new(0.4, 6.0 + t.sin())).collect();
    let down: Vec<Complex64> = ts.iter().map(|t| Complex64::new(0.4, -6.0 + t.sin())).collect();
    let a = solve_periodic_mode(&up, &g, &tol).unwrap();
    let b = solve_periodic_mode(&down, &g, &tol).unwrap();
    assert_eq!((a.formula, b.formula), (Formula::Forward, Formula::Backward));
    assert!(a.residual < 1e-9 && b.residual < 1e-9);
}

#[test]
fn counterexample_for_an_integer_average() {
    let tol = Tolerances::default();
    let q = triangular_example(TrigPolynomial::sin_affine(0.0, 1.0), TrigPolynomial::real_constant(1.0));
    let lattice = Lattice::new(1, 32).unwrap();
    let grid = TimeGrid::new(128).unwrap();
    let field = eigen_field(&q, &lattice, &grid, BranchOrder::Oriented, &tol).unwrap();
    let lambda = branch_table(&field, 0).unwrap();
    let witnesses: Vec<Vec<i64>> = (-32..=32).map(|x| vec![x]).collect();
    let sol = build_nonsmooth_solution(&lambda, &witnesses, &tol).unwrap();
    assert!(sol.max_residual() < 1e-10, "{}", sol.max_residual());
    for (xi, rows) in &sol.u.data {
        for (j, z) in rows[0].iter().enumerate() {
            let t = 2.0 * PI * j as f64 / 128.0;
            let exact = Complex64::from_polar(1.0, -(xi[0] as f64) * t + t.cos() - 1.0);
            assert!((z - exact).norm() < 1e-12, "{xi:?} {j}");
        }
    }
    assert!(sol.f.data.values().flatten().flatten().all(|z| z.norm() == 0.0));
    let report = classify_decay(&sol.u, 2, &lattice, &tol).unwrap();
    assert_eq!(report.class, DecayClass::DistributionOnly);
    let settings = VariableSettings { grid: TimeGrid::new(64).unwrap(), order: BranchOrder::Oriented, alpha_max: 2 };
    let v = diagnose_variable(&q, &lattice, &settings, &tol).unwrap();
    assert_eq!(v.verdict, Verdict::NonGhResonant, "{}", serde_json::to_string_pretty(&v).unwrap());
}
