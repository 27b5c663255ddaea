use chaosfield::analytic_moments::*;
use chaosfield::kernels::{omega_d, Mollifier};
use chaosfield::lattice::Lattice;
use chaosfield::synthesis::Needs;
use chaosfield::*;
use proptest::prelude::*;
use std::sync::OnceLock;

/// Closed form of `ρ` in d = 1 at `R = 1`.
fn rho_1d(t: f64) -> f64 {
    if t <= 1.0 {
        std::f64::consts::PI + 4.0 * ((1.0 - t) / t).sqrt().asinh()
    } else if t < 2.0 {
        2.0 * ((2.0 - t) / t).asin()
    } else {
        0.0
    }
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `∫_a^b f` for `f` integrably singular at both ends: each half is mapped
/// by `y = end ± (half width)·s⁴`.
fn graded(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    let w = m - a;
    let left = simpson(|s| if s == 0.0 { 0.0 } else { f(a + w * s.powi(4)) * 4.0 * w * s.powi(3) }, 0.0, 1.0, 20_000);
    let right = simpson(|s| if s == 0.0 { 0.0 } else { f(b - w * s.powi(4)) * 4.0 * w * s.powi(3) }, 0.0, 1.0, 20_000);
    left + right
}

fn suite(p: FieldParams) -> KernelSuite {
    derive_constants(p, Mollifier::default()).unwrap()
}

/// d = 1 chaos suite with `γ²ω_d = lam`.
fn chaos_suite() -> &'static KernelSuite {
    static S: OnceLock<KernelSuite> = OnceLock::new();
    S.get_or_init(|| suite(FieldParams::default()))
}

fn unit_box() -> Integrand {
    Integrand::BoxIndicator { lo: 0.0, hi: 1.0 }
}

fn gamma_for(lam: f64, d: usize) -> f64 {
    (lam / omega_d(d)).sqrt()
}

fn opts() -> EvalOptions {
    EvalOptions::default()
}

#[test]
fn chaos_low_orders() {
    let s = chaos_suite();
    let g = gamma_for(0.2, 1);
    let m1 = chaos_moment(s, &MomentSpec::chaos(unit_box(), 1, g), &opts()).unwrap();
    assert!((m1.value - 1.0).abs() < 1e-9, "{m1:?}");
    let k1 = chaos_moment(s, &MomentSpec::chaos(Integrand::Kernel { component: 0 }, 1, g), &opts()).unwrap();
    assert!(k1.value.abs() < 1e-9, "{k1:?}");
    let flat = chaos_moment(s, &MomentSpec::chaos(unit_box(), 2, 0.0), &opts()).unwrap();
    assert!((flat.value - 1.0).abs() < 1e-9);
}

#[test]
fn chaos_second_moment_matches_closed_form_rho() {
    let s = chaos_suite();
    for lam in [0.1, 0.2] {
        let g = gamma_for(lam, 1);
        let c = g * g;
        // ∫∫_{[0,1]²} e^{cρ(x-y)} = 2∫₀¹ (1-t) e^{cρ(t)} dt, with t = u⁵
        let oracle = 2.0 * simpson(|u| if u == 0.0 { 0.0 } else { 5.0 * u.powi(4) * (1.0 - u.powi(5)) * (c * rho_1d(u.powi(5))).exp() }, 0.0, 1.0, 200_000);
        let m = chaos_moment(s, &MomentSpec::chaos(unit_box(), 2, g), &opts()).unwrap();
        assert!((m.value - oracle).abs() < 1e-4 * oracle, "lam {lam}: {} vs {oracle}", m.value);
        assert_eq!(m.method, Method::TensorQuadrature);
        if lam == 0.2 {
            assert!((oracle - 2.4194996).abs() < 1e-6, "{oracle}");
        }
    }
}

#[test]
fn chaos_mc_agrees_with_quadrature() {
    let s = chaos_suite();
    let g = gamma_for(0.2, 1);
    let spec = MomentSpec::chaos(unit_box(), 2, g);
    let quad = chaos_moment(s, &spec, &opts()).unwrap();
    let mc = chaos_moment(s, &spec, &EvalOptions { method: Some(Method::ImportanceMc), ..opts() }).unwrap();
    assert!((mc.value - quad.value).abs() < 0.03 * quad.value, "{mc:?} {quad:?}");
    assert!((mc.value - quad.value).abs() < 4.0 * mc.abs_error);
}

#[test]
fn cross_moment_reduces_to_power() {
    let s = chaos_suite();
    let g = gamma_for(0.1, 1);
    let a = chaos_moment(s, &MomentSpec::chaos(unit_box(), 2, g), &opts()).unwrap();
    let b = chaos_moment(s, &MomentSpec::chaos_cross(unit_box(), 1, g, unit_box(), 1, g), &opts()).unwrap();
    assert!((a.value - b.value).abs() < 1e-8 * a.value);
}

#[test]
fn chaos_gates() {
    let s = chaos_suite();
    let too_big = gamma_for(1.01, 1);
    assert!(matches!(
        chaos_moment(s, &MomentSpec::chaos(unit_box(), 1, too_big), &opts()),
        Err(Error::IntegrabilityGateViolated(_))
    ));
    let g = gamma_for(0.6, 1);
    assert!(matches!(
        chaos_moment(s, &MomentSpec::chaos(unit_box(), 4, g), &opts()),
        Err(Error::IntegrabilityGateViolated(_))
    ));
}

fn x_params(lam1: f64, g0s: f64) -> FieldParams {
    FieldParams { d: 1, alpha: 0.8, gamma1: gamma_for(lam1, 1), gamma0_star: g0s, epsilon: 0.3, ..Default::default() }
}

#[test]
fn x_even_second_moment_is_kernel_energy() {
    let s = suite(x_params(0.05, 0.0));
    let h = 0.1;
    let oracle = graded(|y| (s.eval_fr(&[y], 0) - s.eval_fr(&[y - h], 0)).powi(2), -2.0, 0.0)
        + graded(|y| (s.eval_fr(&[y], 0) - s.eval_fr(&[y - h], 0)).powi(2), 0.0, h)
        + graded(|y| (s.eval_fr(&[y], 0) - s.eval_fr(&[y - h], 0)).powi(2), h, 2.0 + h);
    let m = x_moment_even(&s, &MomentSpec::x_even(1, vec![h], 0), &opts()).unwrap();
    assert!((m.value - oracle).abs() < 1e-5 * oracle, "{} vs {oracle}", m.value);
}

#[test]
fn x_even_fourth_moment_reduces_to_wick_without_intermittency() {
    let s = suite(x_params(0.0, 0.0));
    let h = vec![0.1];
    let m2 = x_moment_even(&s, &MomentSpec::x_even(1, h.clone(), 0), &opts()).unwrap();
    let m4 = x_moment_even(&s, &MomentSpec::x_even(2, h, 0), &opts()).unwrap();
    assert!((m4.value - 3.0 * m2.value * m2.value).abs() < 1e-6 * m4.value, "{m4:?} {m2:?}");
}

#[test]
fn x_even_intermittency_raises_flatness() {
    let h = vec![0.05];
    let flat = |lam: f64| {
        let s = suite(x_params(lam, 0.0));
        let m2 = x_moment_even(&s, &MomentSpec::x_even(1, h.clone(), 0), &opts()).unwrap().value;
        let m4 = x_moment_even(&s, &MomentSpec::x_even(2, h.clone(), 0), &opts()).unwrap().value;
        m4 / (m2 * m2)
    };
    assert!(flat(0.05) > flat(0.0) + 1e-3);
}

#[test]
fn x_even_matches_lattice_synthesis() {
    let p = x_params(0.05, 0.0);
    let lattice = Lattice::periodic(1, 64, 0.075);
    let syn = Synthesizer::new(p, lattice, Mollifier::default(), Needs::for_kind(FieldKind::XFamily)).unwrap();
    let lag = 4usize;
    let h = lag as f64 * 0.075;
    let per: Vec<(f64, f64)> = syn
        .batch(FieldKind::XFamily, 42, 3000, 1, |f| {
            let v = &f.values[0];
            let n = v.len();
            let (mut s2, mut s4) = (0.0, 0.0);
            for i in 0..n {
                let dx = v[(i + lag) % n] - v[i];
                s2 += dx * dx;
                s4 += dx.powi(4);
            }
            Ok((s2 / n as f64, s4 / n as f64))
        })
        .unwrap();
    let n = per.len() as f64;
    let stats = |sel: &dyn Fn(&(f64, f64)) -> f64| {
        let m = per.iter().map(sel).sum::<f64>() / n;
        let v = per.iter().map(|x| (sel(x) - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    };
    let (m2, se2) = stats(&|x| x.0);
    let (m4, se4) = stats(&|x| x.1);
    let s = suite(p);
    let spec = |l| MomentSpec { mollified: true, ..MomentSpec::x_even(l, vec![h], 0) };
    let a2 = x_moment_even(&s, &spec(1), &opts()).unwrap().value;
    let a4 = x_moment_even(&s, &spec(2), &opts()).unwrap().value;
    assert!((m2 - a2).abs() < 4.0 * se2 + 0.01 * a2, "2nd: lattice {m2} ± {se2}, analytic {a2}");
    assert!((m4 - a4).abs() < 4.0 * se4 + 0.03 * a4, "4th: lattice {m4} ± {se4}, analytic {a4}");
}

#[test]
fn x_odd_vanishes_without_asymmetry() {
    let s = suite(x_params(0.05, 0.0));
    let m = x_moment_odd(&s, &MomentSpec::x_odd(1, vec![0.1], 0), &opts()).unwrap();
    assert_eq!(m.moment.value, 0.0);
    assert_eq!(m.surrogate.unwrap().sigma, 0.0);
}

#[test]
fn odd_surrogate_is_gated_in_one_dimension() {
    let s = suite(x_params(0.05, 0.5));
    let m = x_moment_odd(&s, &MomentSpec::x_odd(1, vec![0.05], 0), &opts()).unwrap();
    assert!(m.surrogate.is_none());
    assert_eq!(m.surrogate_gate.as_deref(), Some("1+2lγ₁²ω_d<α"));
    assert!(m.moment.value.is_finite());
    assert!(matches!(radial_dissipation_integral(1, &s), Err(Error::IntegrabilityGateViolated(_))));
}

fn d3_suite() -> &'static KernelSuite {
    static S: OnceLock<KernelSuite> = OnceLock::new();
    S.get_or_init(|| {
        suite(FieldParams {
            d: 3,
            alpha: 2.2,
            gamma1: gamma_for(0.1, 3),
            gamma0_star: 0.5,
            epsilon: 0.1,
            ..Default::default()
        })
    })
}

#[test]
fn dissipation_integral_is_negative_and_matches_parts() {
    let s = d3_suite();
    let dis = radial_dissipation_integral(1, s).unwrap();
    assert!(dis < 0.0, "{dis}");
    let mut p0 = s.params;
    p0.gamma1 = 0.0;
    let s0 = suite(p0);
    let d0 = radial_dissipation_integral(1, &s0).unwrap();
    // ∫ r^{α-1}φ ρ' = -∫ ρ (r^{α-1}φ)'; boundary terms vanish for α > 1
    let a = p0.alpha;
    let weight = |r: f64| r.powf(a - 1.0) * kernels::cutoff(r);
    let dw = |r: f64| {
        let e = 1e-6 * r;
        (weight(r + e) - weight(r - e)) / (2.0 * e)
    };
    let rho = |r: f64| s0.rho_radial(r).unwrap();
    let parts = -(graded(|r| rho(r) * dw(r), 0.0, 1.0) + simpson(|r| rho(r) * dw(r), 1.0, 2.0, 4000));
    assert!((d0 - parts).abs() < 1e-5 * d0.abs(), "{d0} vs {parts}");
}

#[test]
fn odd_moment_positive_in_three_dimensions() {
    let s = d3_suite();
    let o = EvalOptions { mc_samples: 1 << 16, ..opts() };
    let m = x_moment_odd(s, &MomentSpec::x_odd(1, vec![0.05, 0.0, 0.0], 0), &o).unwrap();
    let sur = m.surrogate.expect("surrogate gate holds");
    assert!(sur.dissipation < 0.0);
    assert!(sur.sigma > 0.0, "{sur:?}");
    assert!(sur.i_l.value > 0.0);
    assert_eq!(sur.zeta, scaling_exponent(ExponentFamily::XFamily, 3, &s.params).unwrap());
}

fn x0_suite() -> &'static KernelSuite {
    static S: OnceLock<KernelSuite> = OnceLock::new();
    S.get_or_init(|| {
        suite(FieldParams { d: 1, alpha: 0.5, gamma0: gamma_for(0.1, 1), epsilon: 1.0 / 256.0, ..Default::default() })
    })
}

#[test]
fn x0_second_moment_frozen() {
    let m = x0_moment(x0_suite(), &MomentSpec::x0(2, vec![0.01], 0), &opts()).unwrap();
    assert!((m.moment.value - 0.0474991).abs() < 2e-6, "{:?}", m.moment);
    assert!((m.c_q.value - 2.97238).abs() < 2e-4, "{:?}", m.c_q);
    assert!(m.c_q.value > 0.0);
    assert_eq!(m.zeta, 2.0 * 0.5 - 0.1);
}

#[test]
fn x0_mc_agrees_with_quadrature() {
    let o = EvalOptions { method: Some(Method::ImportanceMc), ..opts() };
    let m = x0_moment(x0_suite(), &MomentSpec::x0(2, vec![0.01], 0), &o).unwrap();
    assert!((m.moment.value - 0.0474991).abs() < 4.0 * m.moment.abs_error, "{:?}", m.moment);
    assert!((m.c_q.value - 2.97238).abs() < 4.0 * m.c_q.abs_error, "{:?}", m.c_q);
}

#[test]
fn x0_third_order_mc_is_consistent_and_nonzero() {
    // reference values from nested quadrature at rel_tol 1e-5
    let o = EvalOptions { mc_samples: 1 << 20, ..opts() };
    let m = x0_moment(x0_suite(), &MomentSpec::x0(3, vec![0.01], 0), &o).unwrap();
    assert_eq!(m.moment.method, Method::ImportanceMc);
    assert!((m.moment.value - 0.0624017).abs() < 4.0 * m.moment.abs_error, "{:?}", m.moment);
    assert!((m.c_q.value - 15.34442).abs() < 4.0 * m.c_q.abs_error, "{:?}", m.c_q);
    assert!(m.c_q.value.abs() > 2.0 * m.c_q.abs_error, "{:?}", m.c_q);
}

#[test]
fn x0_without_intermittency_has_zero_second_moment() {
    let mut p = x0_suite().params;
    p.gamma0 = 0.0;
    let s = suite(p);
    let m = x0_moment(&s, &MomentSpec::x0(2, vec![0.01], 0), &opts()).unwrap();
    assert!(m.moment.value.abs() < 1e-9, "{:?}", m.moment);
}

#[test]
fn x0_gates() {
    let mut p = x0_suite().params;
    p.gamma0 = gamma_for(0.6, 1);
    assert!(matches!(x0_gate(&p, 2), Err(Error::IntegrabilityGateViolated(m)) if m == "γ₀²ω_d<α"));
    p.gamma0 = gamma_for(0.3, 1);
    assert!(matches!(x0_gate(&p, 4), Err(Error::IntegrabilityGateViolated(m)) if m == "(2l−3/2)γ₀²ω_d<α∧d/2"));
    p.alpha = 1.2;
    assert!(x0_gate(&p, 1).is_err());
}

#[test]
fn exponent_closed_forms() {
    let p = FieldParams { d: 1, alpha: 0.8, gamma1: gamma_for(0.05, 1), ..Default::default() };
    let z = |q| scaling_exponent(ExponentFamily::XFamily, q, &p).unwrap();
    assert!((z(2) - 0.6).abs() < 1e-15);
    assert!((2.0 * z(2) - z(4) - 4.0 * 0.05).abs() < 1e-15);
    assert!((z(3) - z(2) - 1.0).abs() < 1e-15);
    assert!(matches!(scaling_exponent(ExponentFamily::XFamily, 1, &p), Err(Error::FamilyOrderMismatch(_))));
    assert!(matches!(scaling_exponent(ExponentFamily::X0Family, 0, &p), Err(Error::FamilyOrderMismatch(_))));
    assert!((scaling_exponent(ExponentFamily::GaussianBase, 3, &p).unwrap() - 0.9).abs() < 1e-15);
}

#[test]
fn four_fifths_calibration_values() {
    let (a, z3) = four_fifths_calibration(0.023);
    assert!((a - (1.0 / 3.0 + 0.023)).abs() < 1e-10);
    assert_eq!(format!("{a:.4}"), "0.3563");
    assert_eq!(z3, 1.0);
    let (a0, z0) = four_fifths_calibration(0.0);
    assert_eq!((a0, z0), (1.0 / 3.0, 1.0));
}

#[test]
fn bound_exponents_match_targets() {
    let p = FieldParams { d: 1, alpha: 0.8, ..Default::default() };
    for (mode, delta) in [(BoundMode::FirstPower, 0.0), (BoundMode::FirstPower, 0.4), (BoundMode::Squared, 0.0), (BoundMode::Squared, 0.3)] {
        let b = increment_kernel_bound_exponent(delta, &p, mode).unwrap();
        assert!((b.slope - b.target).abs() < 0.05, "{mode:?} δ={delta}: {} vs {}", b.slope, b.target);
    }
    assert!(matches!(increment_kernel_bound_exponent(0.8, &p, BoundMode::FirstPower), Err(Error::GateViolated(_))));
    assert!(matches!(increment_kernel_bound_exponent(0.7, &p, BoundMode::Squared), Err(Error::GateViolated(_))));
}

#[test]
fn moment_table_csv_has_one_row_per_moment() {
    let s = chaos_suite();
    let spec = MomentSpec::chaos(unit_box(), 1, 0.1);
    let est = chaos_moment(s, &spec, &opts()).unwrap();
    let csv = moment_table_csv(&[MomentRow { spec: spec.clone(), estimate: est }, MomentRow { spec, estimate: est }]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("family,order"));
    assert!(lines[1].starts_with("chaos,1,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cross_moment_is_symmetric(a in -1.0f64..0.5, w1 in 0.2f64..1.0, b in -0.5f64..1.0, w2 in 0.2f64..1.0, l1 in 0.0f64..0.4, l2 in 0.0f64..0.4) {
        let s = chaos_suite();
        let f = Integrand::BoxIndicator { lo: a, hi: a + w1 };
        let g = Integrand::BoxIndicator { lo: b, hi: b + w2 };
        let (g1, g2) = (gamma_for(l1, 1), gamma_for(l2, 1));
        let o = EvalOptions { rel_tol: 1e-6, ..opts() };
        let x = chaos_moment(s, &MomentSpec::chaos_cross(f.clone(), 1, g1, g.clone(), 1, g2), &o).unwrap();
        let y = chaos_moment(s, &MomentSpec::chaos_cross(g, 1, g2, f, 1, g1), &o).unwrap();
        prop_assert!((x.value - y.value).abs() <= 1e-5 * x.value.abs(), "{} {}", x.value, y.value);
    }

    #[test]
    fn x0_exponents_are_concave(alpha in 0.05f64..0.95, lam in 0.001f64..1.0, q in 2usize..8) {
        let p = FieldParams { d: 1, alpha, gamma0: gamma_for(lam, 1), ..Default::default() };
        let z = |q| scaling_exponent(ExponentFamily::X0Family, q, &p).unwrap();
        prop_assert!(z(q + 1) - 2.0 * z(q) + z(q - 1) < 0.0);
    }

    #[test]
    fn x_even_exponents_are_concave(alpha in 0.55f64..0.95, lam in 0.001f64..0.5, l in 2usize..6) {
        let p = FieldParams { d: 1, alpha, gamma1: gamma_for(lam, 1), ..Default::default() };
        let z = |l: usize| scaling_exponent(ExponentFamily::XFamily, 2 * l, &p).unwrap();
        prop_assert!(z(l + 1) - 2.0 * z(l) + z(l - 1) < 0.0);
    }

    #[test]
    fn four_fifths_is_exact(mu in 0.0f64..0.6) {
        let (a, z3) = four_fifths_calibration(mu);
        // the identity holds to rounding for general μ
        prop_assert!((z3 - 1.0).abs() <= 4.0 * f64::EPSILON, "{}", z3);
        prop_assert!((a - 1.0 / 3.0 - mu).abs() < 1e-15);
    }
}
