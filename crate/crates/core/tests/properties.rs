use std::f64::consts::PI;

use hypolab::diagnostics::{diophantine_fit, min_tau_distance, siegel_distance, Verdict};
use hypolab::fourier::{classify_decay, periodic_quadrature, spectral_derivative, DecayClass, ModeTable};
use hypolab::solver::{solve_periodic_mode, solve_periodic_mode_with, Formula};
use hypolab::symbol::{estimate_order, Lattice, MatrixSymbol, OrderVerdict, SpatialExpr, SymbolEntry, TimeGrid, TrigPolynomial};
use hypolab::triangular::smooth::d_t_field;
use hypolab::triangular::{eigen_field, smooth_triangularize, BranchOrder};
use hypolab::Tolerances;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn sup(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..50, 0u32..4).prop_map(|(a, d)| if d == 0 { a.to_string() } else { format!("{a}.{d}") }),
        Just("xi1".to_string()),
        Just("xi2".to_string()),
        Just("abs_xi".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]))
                .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
            (inner.clone(), -3i32..4).prop_map(|(a, p)| format!("({a})^{p}")),
            inner.clone().prop_map(|a| format!("sqrt({a})")),
            inner.clone().prop_map(|a| format!("exp(-({a}))")),
            inner.prop_map(|a| format!("-{a}")),
        ]
    })
}

fn trig_poly() -> impl Strategy<Value = TrigPolynomial> {
    prop::collection::vec((-4i64..=4, -2.0f64..2.0, -2.0f64..2.0), 1..6)
        .prop_map(|terms| TrigPolynomial::new(terms.into_iter().map(|(k, re, im)| (k, c(re, im)))))
}

/// Samples of a random trigonometric polynomial of degree `<= 6` on `len` points.
fn bandlimited(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-6i64..=6, -1.0f64..1.0, -1.0f64..1.0), 1..8).prop_map(move |terms| {
        (0..len)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / len as f64;
                terms.iter().map(|&(k, re, im)| c(re, im) * Complex64::from_polar(1.0, k as f64 * t)).sum()
            })
            .collect()
    })
}

/// `lambda = l0 + small real oscillation`, with `l0` away from the integers.
fn lambda_field(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    (-20.0f64..20.0, 0.15f64..0.85, -1.0f64..1.0, -1.0f64..1.0, -0.5f64..0.5).prop_map(
        move |(n, frac, a, b, im)| {
            let l0 = n.floor() + frac;
            (0..len)
                .map(|j| {
                    let t = 2.0 * PI * j as f64 / len as f64;
                    c(l0 + a * t.sin() + b * (2.0 * t).cos(), im + 0.3 * a * t.cos())
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn printing_a_parsed_expression_is_a_fixed_point(src in expr_source()) {
        let once = SpatialExpr::parse(&src).unwrap().pretty();
        let twice = SpatialExpr::parse(&once).unwrap().pretty();
        prop_assert_eq!(&once, &twice);
        let a = SpatialExpr::parse(&src).unwrap().eval(&[3, -2]);
        let b = SpatialExpr::parse(&once).unwrap().eval(&[3, -2]);
        match (a, b) {
            (Ok(x), Ok(y)) => prop_assert!(x == y || (x.is_nan() && y.is_nan()) || (x - y).abs() <= 1e-12 * x.abs()),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }

    #[test]
    fn derivative_has_zero_average(p in trig_poly(), alpha in 1u32..4) {
        prop_assert_eq!(p.derivative(alpha).average(), c(0.0, 0.0));
    }

    #[test]
    fn entries_are_linear_in_the_time_factor(p in trig_poly(), s_re in -3.0f64..3.0, s_im in -3.0f64..3.0,
                                             t in 0.0f64..6.3, x in -20i64..20) {
        let s = c(s_re, s_im);
        let base = MatrixSymbol::new(1, 1, vec![vec![SymbolEntry::new(p.clone(), "xi1 + 0.5").unwrap()]]).unwrap();
        let scaled = MatrixSymbol::new(1, 1, vec![vec![SymbolEntry::new(p.scale(s), "xi1 + 0.5").unwrap()]]).unwrap();
        let a = base.eval(t, &[x]).unwrap()[(0, 0)];
        let b = scaled.eval(t, &[x]).unwrap()[(0, 0)];
        prop_assert!((b - s * a).norm() <= 1e-12 * (1.0 + (s * a).norm()));
    }

    #[test]
    fn spectral_derivatives_compose(v in bandlimited(64), a in 0u32..3, b in 0u32..3) {
        let ab = spectral_derivative(&spectral_derivative(&v, a).unwrap(), b).unwrap();
        let direct = spectral_derivative(&v, a + b).unwrap();
        prop_assert!(sup_diff(&ab, &direct) < 1e-10 * (1.0 + sup(&direct)));
    }

    #[test]
    fn derivative_integrates_to_zero(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 32)) {
        let v: Vec<Complex64> = v.into_iter().map(|(r, i)| c(r, i)).collect();
        let q = periodic_quadrature(&spectral_derivative(&v, 1).unwrap());
        prop_assert!(q.norm() <= 1e-12 * (1.0 + sup(&v)) * 32.0);
    }

    #[test]
    fn min_tau_distance_is_invariant_under_integer_shifts(re in -1e6f64..1e6, im in -10.0f64..10.0, k in -1000i64..1000) {
        let z = c(re, im);
        let d0 = min_tau_distance(z);
        let d1 = min_tau_distance(z + k as f64);
        // Adding an integer to a large real part rounds; compare to that scale.
        prop_assert!((d0 - d1).abs() <= 1e-15 * (re.abs() + k.abs() as f64 + 1.0) * 4.0);
    }

    #[test]
    fn siegel_distance_is_periodic(re in -100.0f64..100.0, im in -2.0f64..2.0) {
        let z = c(re, im);
        let (a, b) = (siegel_distance(z), siegel_distance(z + 1.0));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn siegel_distance_vanishes_exactly_at_integers(n in -1000i64..1000, off in 1e-6f64..0.5) {
        prop_assert_eq!(siegel_distance(c(n as f64, 0.0)), 0.0);
        prop_assert!(siegel_distance(c(n as f64 + off, 0.0)) > 0.0);
        prop_assert!(siegel_distance(c(n as f64, off)) > 0.0);
    }

    #[test]
    fn solver_is_linear(lambda in lambda_field(64), g1 in bandlimited(64), g2 in bandlimited(64),
                        a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let tol = Tolerances::default();
        let mix: Vec<Complex64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
        let v1 = solve_periodic_mode(&lambda, &g1, &tol).unwrap().v;
        let v2 = solve_periodic_mode(&lambda, &g2, &tol).unwrap().v;
        let v = solve_periodic_mode(&lambda, &mix, &tol).unwrap().v;
        let combo: Vec<Complex64> = v1.iter().zip(&v2).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(sup_diff(&v, &combo) <= tol.ode_tol * (1.0 + sup(&combo)));
    }

    #[test]
    fn constant_data_gives_the_quotient(l_re in -30.0f64..30.0, l_im in -3.0f64..3.0,
                                        g_re in -5.0f64..5.0, g_im in -5.0f64..5.0) {
        let lambda = c(l_re, l_im);
        prop_assume!(siegel_distance(lambda) > 1e-3);
        let tol = Tolerances::default();
        let g = c(g_re, g_im);
        let v = solve_periodic_mode(&[lambda; 32], &[g; 32], &tol).unwrap().v;
        let expected = g / lambda;
        prop_assert!(v.iter().all(|z| (z - expected).norm() <= 1e-12 * (1.0 + expected.norm())));
    }

    #[test]
    fn forward_and_backward_formulas_agree(lambda in lambda_field(64), g in bandlimited(64)) {
        let tol = Tolerances::default();
        let f = solve_periodic_mode_with(&lambda, &g, Formula::Forward, &tol).unwrap().v;
        let b = solve_periodic_mode_with(&lambda, &g, Formula::Backward, &tol).unwrap().v;
        prop_assert!(sup_diff(&f, &b) <= tol.ode_tol * (1.0 + sup(&f)));
    }

    #[test]
    fn decay_weight_keeps_smooth_tables_smooth(rate in 0.3f64..2.0, k in -3i64..=3) {
        let lat = Lattice::new(1, 64).unwrap();
        let pts = lat.points();
        let tol = Tolerances::default();
        let u = ModeTable::from_fn(32, &pts, |t, xi| Complex64::from_polar((-rate * xi[0].abs() as f64).exp(), k as f64 * t)).unwrap();
        let w = ModeTable::from_fn(32, &pts, |t, xi| {
            Complex64::from_polar((-(rate + 1.0) * xi[0].abs() as f64).exp(), k as f64 * t)
        }).unwrap();
        let before = classify_decay(&u, 2, &lat, &tol).unwrap().class;
        let after = classify_decay(&w, 2, &lat, &tol).unwrap().class;
        prop_assert!(before != DecayClass::Smooth || after == DecayClass::Smooth, "{:?} -> {:?}", before, after);
        if rate >= 1.0 {
            prop_assert_eq!(before, DecayClass::Smooth);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Reconstruction, nilpotency and `D_t(S^{-1}) + B S^{-1} = 0` on random
    /// symbols `a(t) I + b(t) [[xi, c], [0, -xi]]`-type data with separated
    /// branches.
    #[test]
    fn triangular_form_identities(a in trig_poly(), b0 in 1.0f64..3.0, b1 in -0.4f64..0.4, cpl in -2.0f64..2.0) {
        let tol = Tolerances::default();
        let b = TrigPolynomial::cos_affine(b0, b1);
        let e = |t: &TrigPolynomial, s: &str| SymbolEntry::new(t.clone(), s).unwrap();
        let off = format!("{cpl}");
        let q = MatrixSymbol::new(2, 1, vec![
            vec![e(&a, "1"), e(&b, &off)],
            vec![e(&b, "xi1"), e(&a, "1")],
        ]).unwrap();
        let lat = Lattice::new(1, 8).unwrap();
        let field = eigen_field(&q, &lat, &TimeGrid::new(64).unwrap(), BranchOrder::Oriented, &tol).unwrap();
        let form = smooth_triangularize(&field, &q, &tol).unwrap();
        for f in &form.modes {
            prop_assert!(f.residual <= tol.resid_tol, "{:?}: {}", f.xi, f.residual);
            prop_assert_eq!(f.nilpotency_defect(), 0.0);
            let ds = d_t_field(&f.s_inv).unwrap();
            let scale = f.s_inv.iter().map(|m| m.norm()).fold(0.0, f64::max).max(1.0);
            for j in 0..f.s_inv.len() {
                let r = (&ds[j] + &f.b[j] * &f.s_inv[j]).norm();
                prop_assert!(r <= 1e-8 * scale, "{:?} t{}: {}", f.xi, j, r);
            }
        }
    }

    #[test]
    fn tau_and_siegel_distances_share_a_verdict(num in 1i64..40, den in 41i64..97, im in -0.5f64..0.5, irr in any::<bool>()) {
        let tol = Tolerances::default();
        let lat = Lattice::new(1, 512).unwrap();
        let rate = if irr { 2f64.sqrt() * num as f64 / den as f64 } else { num as f64 / den as f64 };
        let pts = lat.points();
        let l0 = |xi: &[i64]| c(rate * xi[0] as f64, im);
        let tau: Vec<f64> = pts.iter().map(|p| { let d = min_tau_distance(l0(p)); if d <= tol.res_tol { 0.0 } else { d } }).collect();
        let sig: Vec<f64> = pts.iter().map(|p| { let d = siegel_distance(l0(p)); if d <= tol.res_tol { 0.0 } else { d } }).collect();
        let ft = diophantine_fit(pts.iter().map(|p| p.as_slice()).zip(tau), &lat, &tol).unwrap();
        let fs = diophantine_fit(pts.iter().map(|p| p.as_slice()).zip(sig), &lat, &tol).unwrap();
        let class = |v: Verdict| v == Verdict::GhConsistent;
        prop_assert_eq!(class(ft.verdict), class(fs.verdict), "{:?} vs {:?}", ft.verdict, fs.verdict);
    }
}

#[test]
fn order_of_powers_of_the_norm() {
    let tol = Tolerances::default();
    let lat = Lattice::new(2, 128).unwrap();
    let pts = lat.points();
    for p in 0..=3 {
        let e = SpatialExpr::parse(&format!("abs_xi^{p}")).unwrap();
        let vals: Vec<f64> = pts.iter().map(|x| e.eval(x).unwrap()).collect();
        let fit = estimate_order(pts.iter().map(|x| x.as_slice()).zip(vals), &lat, &tol).unwrap();
        match fit.verdict {
            OrderVerdict::Polynomial(nu) => assert!((nu - p as f64).abs() < 0.05, "p = {p}: {nu}"),
            v => panic!("p = {p}: {v:?}"),
        }
    }
}
