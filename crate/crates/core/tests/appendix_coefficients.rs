use chaosfield::appendix_coefficients::{
    appendix_report, even_order_leading_term, leading_term_from_base, phi_p, profile_report, third_moment_positivity,
    AppendixContext, PROFILE_A,
};
use chaosfield::Error;
use proptest::prelude::*;

/// Midpoint sum of `g` on `[a, b]` under an endpoint-graded map.
fn graded(g: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        let (t2, u2) = (t * t, (1.0 - t) * (1.0 - t));
        let dw = 2.0 * (t * u2 + t2 * (1.0 - t)) / (t2 + u2).powi(2);
        // place the node from the nearer endpoint so it never rounds onto it
        let y = if t < 0.5 { a + (b - a) * t2 / (t2 + u2) } else { b - (b - a) * u2 / (t2 + u2) };
        s += g(y) * (b - a) * dw;
    }
    s / n as f64
}

/// Midpoint sum in `ln y` on `[a, b]`, `0 < a < b`.
fn logsum(g: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let h = (lb - la) / n as f64;
    (0..n).map(|i| {
        let y = (la + (i as f64 + 0.5) * h).exp();
        g(y) * y * h
    }).sum()
}

/// Independent Riemann oracle of `Θ(x)` in d = 1 for `1/2 < x`, using the plain difference form of the kernel and an analytic tail.
fn theta_riemann(alpha: f64, x: f64) -> f64 {
    let f = |y: f64| {
        let p = y + 0.5;
        let m = y - 0.5;
        p.signum() * p.abs().powf(alpha - 1.0) - m.signum() * m.abs().powf(alpha - 1.0)
    };
    let g = |y: f64| (x - y).abs().ln() * f(y);
    let big = 1e6;
    let n = 400_000;
    let mut s = graded(&g, -0.5, 0.5, n) + graded(&g, 0.5, x, n) + graded(&g, x, x + 2.0, n) + graded(&g, -2.5, -0.5, n);
    s += logsum(&g, x + 2.0, big, n);
    s += logsum(&|y| g(-y), 2.5, big, n);
    // tails: f ≈ (α-1)·2·... ~ (α-1)|y|^{α-2} per unit separation, ln|x-y| ≈ ln|y|
    let sp = alpha - 1.0; // exponent + 1 of y^{α-2}
    let tail = |l: f64| l.powf(sp) * (-l.ln() / sp + 1.0 / (sp * sp));
    s += 2.0 * (alpha - 1.0) * tail(big);
    s
}

#[test]
fn theta_matches_riemann_oracle() {
    let ctx = AppendixContext::new(1, 0.5).unwrap();
    let direct = ctx.theta_direct(1.0).unwrap();
    let oracle = theta_riemann(0.5, 1.0);
    assert!((direct - oracle).abs() < 0.01 * oracle.abs(), "{direct} vs {oracle}");
}

#[test]
fn theta_is_proportional_to_closed_form() {
    for &alpha in &[0.3, 0.5, 0.7] {
        let ctx = AppendixContext::new(1, alpha).unwrap();
        let fit = ctx.theta_proportionality().unwrap();
        assert_eq!(fit.points.len(), 50);
        assert!(fit.spread < 1e-3, "α={alpha}: spread {}", fit.spread);
    }
}

#[test]
fn kernel_is_even_with_zero_mean() {
    let ctx = AppendixContext::new(1, 0.4).unwrap();
    assert!(ctx.f_integral().unwrap().abs() < 1e-8);
    for &u in &[0.01, 0.3, 0.49, 0.51, 2.0, 30.0] {
        let (a, b) = (ctx.f_kernel(&[u]), ctx.f_kernel(&[-u]));
        assert!((a - b).abs() <= 1e-13 * a.abs());
    }
}

#[test]
fn leading_term_is_positive_and_consistent() {
    let l2 = even_order_leading_term(2, 0.5, 1).unwrap();
    let l1 = even_order_leading_term(1, 0.5, 1).unwrap();
    assert!(l1 > 0.0 && l2 > 0.0);
    // (4!/4)·B² = 6·B² with B = l1
    assert!((l2 - leading_term_from_base(2, l1)).abs() < 1e-12 * l2);
    assert!(matches!(even_order_leading_term(0, 0.5, 1), Err(Error::OrderOutOfRange(_))));
    assert!(matches!(even_order_leading_term(1, 0.5, 2), Err(Error::DimensionUnsupported(2))));
}

#[test]
fn third_moment_integral_is_positive() {
    for &alpha in &[0.3, 0.5, 0.7] {
        let (i, verdict) = third_moment_positivity(alpha, 1).unwrap();
        assert!(i > 0.0 && verdict, "α={alpha}: I={i}");
    }
}

#[test]
fn profiles_and_bound_chain() {
    for &(d, alpha) in &[(1, 0.5), (2, 0.5), (3, 0.8)] {
        let ctx = AppendixContext::new(d, alpha).unwrap();
        let pc = ctx.check_profiles(PROFILE_A).unwrap();
        assert!(pc.z_star > 0.5);
        assert!(pc.varphi_integral.abs() < 1e-6, "d={d}: {}", pc.varphi_integral);
        let (full, chain) = ctx.bound_chain(PROFILE_A).unwrap();
        assert!(chain > 0.0 && chain <= full, "d={d}: {chain} vs {full}");
    }
}

#[test]
fn z_star_is_a_root() {
    let ctx = AppendixContext::new(2, 0.6).unwrap();
    let z = ctx.z_star(0.4).unwrap();
    assert!(ctx.varphi_profile(z - 1e-6, 0.4) > 0.0);
    assert!(ctx.varphi_profile(z + 1e-6, 0.4) < 0.0);
}

#[test]
fn reports_pass() {
    for &alpha in &[0.3, 0.5, 0.7] {
        let r = appendix_report(alpha).unwrap();
        for c in &r.claims {
            assert!(c.pass, "α={alpha}: {c:?}");
        }
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("third_moment_positive"));
    }
    assert!(profile_report(2, 0.5, &[0.1, 0.25, 1.0]).unwrap().pass);
}

#[test]
fn bad_alpha_is_rejected() {
    assert!(AppendixContext::new(1, 1.2).is_err());
    assert!(AppendixContext::new(0, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn phi_is_even(p in 0.05f64..1.5, a in 0.0f64..2.0, y in 0.0f64..50.0) {
        prop_assume!((y - 0.5).abs() > 1e-6);
        let (u, v) = (phi_p(p, y, a), phi_p(p, -y, a));
        prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1e-300));
    }
}
