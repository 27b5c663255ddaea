//! Numerical checks of the non-vanishing of the small-lag coefficients:
//! the log-potential `Θ` of the centered difference kernel, the sign of the
//! even-order leading term and the positivity of the third-order integral.
//!
//! The log integrals run in d = 1; the profile sign structure is also
//! checked in higher dimensions.

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_pt, Pt, Quad, QuadOpts};
use serde::{Deserialize, Serialize};

const REL_TOL: f64 = 1e-11;
/// Number of sample points of the `Θ` proportionality fit.
pub const THETA_SAMPLES: usize = 50;
/// Outer cutoff of the log-kernel integrals; beyond it the far-field
/// power laws are integrated in closed form.
const OUTER_CUT: f64 = 1e4;

/// `h(y) = y / (y² + a)^p`.
fn h(p: f64, y: f64, a: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        y.signum() * y.abs().powf(1.0 - 2.0 * p)
    } else {
        y / (y * y + a).powf(p)
    }
}

/// `φ(p, z, a) = h(z + 1/2) - h(z - 1/2)` from the exact offsets
/// `dp = z + 1/2`, `dm = z - 1/2`.
fn phi_off(p: f64, z: f64, a: f64, dp: f64, dm: f64) -> f64 {
    if z.abs() > 2.0 {
        // difference of nearly equal terms: factor out the smaller one; φ is even
        let (zp, zm) = if z > 0.0 { (dp, dm) } else { (-dm, -dp) };
        let ln_ratio = (1.0 / zm).ln_1p() - p * ((zp * zp - zm * zm) / (zm * zm + a)).ln_1p();
        return h(p, zm, a) * ln_ratio.exp_m1();
    }
    h(p, dp, a) - h(p, dm, a)
}

/// `φ(p, y, a) = (y+1/2)/((y+1/2)²+a)^p - (y-1/2)/((y-1/2)²+a)^p`.
pub fn phi_p(p: f64, y: f64, a: f64) -> f64 {
    phi_off(p, y, a, y + 0.5, y - 0.5)
}

/// `∫_lo^hi g(y, y+1/2, y-1/2) dy` with interior singular points `sing`.
/// Segments away from the kernel are integrated in `ln|y|`, which turns
/// the slow power-law decay into a smooth integrand.
fn span<G: FnMut(f64, f64, f64) -> f64>(mut g: G, lo: f64, hi: f64, sing: &[f64], opts: QuadOpts) -> Quad {
    let a = sing.iter().fold(0.5f64, |m, v| m.max(v.abs())) + 1.5;
    let mut total = Quad::ZERO;
    let mut add = |q: Quad| {
        total = Quad { value: total.value + q.value, error: total.error + q.error, evals: total.evals + q.evals };
    };
    let (ilo, ihi) = (lo.max(-a), hi.min(a));
    if ihi > ilo {
        let mut brk = sing.to_vec();
        brk.extend_from_slice(&[-0.5, 0.5]);
        add(integrate_pt(|p: Pt| g(p.x, p.offset(-0.5), p.offset(0.5)), ilo, ihi, &brk, opts));
    }
    if hi > a {
        add(integrate(|u| {
            let y = u.exp();
            g(y, y + 0.5, y - 0.5) * y
        }, a.ln(), hi.ln(), &[], opts));
    }
    if lo < -a {
        add(integrate(|u| {
            let y = -u.exp();
            g(y, y + 0.5, y - 0.5) * -y
        }, a.ln(), (-lo).ln(), &[], opts));
    }
    total
}

/// `∫_L^∞ g₀ (z/L)^s dz` for `s < -1`.
fn power_tail(g0: f64, l: f64, s: f64) -> f64 {
    g0 * l / (-s - 1.0)
}

/// The kernel and profiles for one `(d, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixContext {
    pub d: usize,
    pub alpha: f64,
}

impl AppendixContext {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::DimensionUnsupported(d));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::ParameterGateViolated(format!("0 < α < 1 fails: α = {alpha}")));
        }
        Ok(AppendixContext { d, alpha })
    }

    fn p_varphi(&self) -> f64 {
        (self.d as f64 - self.alpha + 1.0) / 2.0
    }

    fn p_psi(&self) -> f64 {
        (1.0 - self.alpha) / 2.0
    }

    fn require_1d(&self) -> Result<()> {
        if self.d != 1 {
            return Err(Error::DimensionUnsupported(self.d));
        }
        Ok(())
    }

    /// `f(u) = (u¹+1/2)/|u+e/2|^{d-α+1} - (u¹-1/2)/|u-e/2|^{d-α+1}`, lag
    /// along the first axis.
    pub fn f_kernel(&self, u: &[f64]) -> f64 {
        let a: f64 = u[1..].iter().map(|v| v * v).sum();
        phi_p(self.p_varphi(), u[0], a)
    }

    fn f1(&self, y: f64, dp: f64, dm: f64) -> f64 {
        phi_off(self.p_varphi(), y, 0.0, dp, dm)
    }

    /// Antiderivative of `f` in d = 1, `(|y+1/2|^α - |y-1/2|^α)/α`, at `y > 2`.
    fn f_antiderivative(&self, y: f64) -> f64 {
        let al = self.alpha;
        let m = y - 0.5;
        m.powf(al) * (al * (1.0 / m).ln_1p()).exp_m1() / al
    }

    /// `(x¹+1/2)/|x+e/2|^{1-α} - (x¹-1/2)/|x-e/2|^{1-α}`, the shape of `Θ`.
    pub fn theta_closed_form(&self, x: &[f64]) -> f64 {
        let a: f64 = x[1..].iter().map(|v| v * v).sum();
        phi_p(self.p_psi(), x[0], a)
    }

    /// `Θ(x) = ∫ ln|x-y| f(y) dy` (d = 1). The constant `ln max(|x|, 1)`
    /// is subtracted from the log, which is exact because `∫f = 0` and
    /// keeps the far-field value from cancelling.
    pub fn theta_direct(&self, x: f64) -> Result<f64> {
        Ok(self.theta_quad(x)?.0)
    }

    fn theta_quad(&self, x: f64) -> Result<(f64, f64)> {
        self.require_1d()?;
        if !x.is_finite() {
            return Err(Error::QuadratureNearSingularity("Θ at a non-finite point".into()));
        }
        let shift = x.abs().max(1.0).ln();
        let l = OUTER_CUT * x.abs().max(1.0);
        let q = span(
            |y, dp, dm| {
                let r = (x - y).abs();
                if r == 0.0 {
                    return 0.0;
                }
                (r.ln() - shift) * self.f1(y, dp, dm)
            },
            -l,
            l,
            &[x],
            QuadOpts::rel(REL_TOL),
        );
        let value = q.value + self.theta_tail(x, l, shift) + self.theta_tail(-x, l, shift);
        if !value.is_finite() {
            return Err(Error::QuadratureNearSingularity(format!("Θ({x}) did not converge")));
        }
        Ok((value, q.error))
    }

    /// `∫_L^∞ (ln(y-x) - shift) f(y) dy` by parts and a far-field series of
    /// `G(y)/(y-x)`.
    fn theta_tail(&self, x: f64, l: f64, shift: f64) -> f64 {
        let al = self.alpha;
        let g = self.f_antiderivative(l);
        let c2 = (al - 1.0) * (al - 2.0) / 24.0;
        let mut series = 0.0;
        for k in 0..6 {
            let xk = x.powi(k);
            let kf = k as f64;
            series += xk * (l.powf(al - 1.0 - kf) / (kf + 1.0 - al) + c2 * l.powf(al - 3.0 - kf) / (kf + 3.0 - al));
        }
        -((l - x).ln() - shift) * g - series
    }

    /// `∫ f` over the line.
    pub fn f_integral(&self) -> Result<f64> {
        self.require_1d()?;
        let l = OUTER_CUT;
        let q = span(|y, dp, dm| self.f1(y, dp, dm), 0.0, l, &[], QuadOpts::rel(REL_TOL));
        Ok(2.0 * (q.value - self.f_antiderivative(l)))
    }

    /// `ψ(z) = φ((1-α)/2, z, a)`.
    pub fn psi_profile(&self, z: f64, a: f64) -> f64 {
        phi_p(self.p_psi(), z, a)
    }

    /// `φ((d-α+1)/2, z, a)`.
    pub fn varphi_profile(&self, z: f64, a: f64) -> f64 {
        phi_p(self.p_varphi(), z, a)
    }

    /// Sign change of the varphi profile on `(1/2, ∞)`, by bisection.
    pub fn z_star(&self, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            // at a = 0 the profile jumps from +∞ to -∞ at 1/2
            return Ok(0.5);
        }
        let v = |z: f64| self.varphi_profile(z, a);
        let mut lo = 0.5;
        if !(v(lo) > 0.0) {
            return Err(Error::ProfileSignStructureViolated("varphi not positive at 1/2".into()));
        }
        let mut hi = 1.0;
        while v(hi) >= 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::ProfileSignStructureViolated("varphi never turns negative".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if v(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Checks on a dense grid of `[0, zmax]` that ψ is positive and
    /// decreasing and varphi changes sign once, at `z*`; returns `z*` and
    /// `∫₀^∞ varphi`.
    pub fn check_profiles(&self, a: f64) -> Result<ProfileCheck> {
        let zs = self.z_star(a)?;
        let zmax = 50.0 * zs.max(1.0);
        let n = 20_000;
        let grid: Vec<f64> = (0..=n).map(|i| zmax * (i as f64 / n as f64).powi(2)).collect();
        let mut prev = f64::INFINITY;
        for &z in &grid {
            let p = self.psi_profile(z, a);
            if !(p > 0.0) {
                return Err(Error::ProfileSignStructureViolated(format!("ψ({z}) = {p} is not positive")));
            }
            if p > prev * (1.0 + 1e-12) {
                return Err(Error::ProfileSignStructureViolated(format!("ψ increases at z = {z}")));
            }
            prev = p;
        }
        let mut changes = 0;
        let mut last = self.varphi_profile(0.0, a).signum();
        for &z in grid.iter().skip(1) {
            let s = self.varphi_profile(z, a).signum();
            if s != 0.0 && s != last && !(a == 0.0 && z == 0.5) {
                changes += 1;
                if z > zs + 2.0 * zmax / n as f64 {
                    return Err(Error::ProfileSignStructureViolated(format!("sign change at {z}, z* = {zs}")));
                }
                last = s;
            }
        }
        if changes != 1 {
            return Err(Error::ProfileSignStructureViolated(format!("varphi changes sign {changes} times")));
        }
        let pv = self.p_varphi();
        let l = OUTER_CUT;
        let body = span(|z, dp, dm| phi_off(pv, z, a, dp, dm), 0.0, l, &[zs], QuadOpts::rel(1e-12));
        // ∫_L^∞ [h(z+1/2) - h(z-1/2)] telescopes to -∫_{L-1/2}^{L+1/2} h
        let tail = integrate(|y| h(pv, y, a), l - 0.5, l + 0.5, &[], QuadOpts::rel(1e-13));
        Ok(ProfileCheck { a, z_star: zs, varphi_integral: body.value - tail.value })
    }

    /// The bound chain at transverse parameter `a`:
    /// `(∫_R φψ², 2∫₀^{z*} φ(ψ² - ψ(z*)²))`; the first must dominate the
    /// second and the second must be positive.
    pub fn bound_chain(&self, a: f64) -> Result<(f64, f64)> {
        let zs = self.z_star(a)?;
        let ps = self.psi_profile(zs, a);
        let pv = self.p_varphi();
        let l = OUTER_CUT;
        let full = span(
            |z, dp, dm| {
                let psi = self.psi_profile(z, a);
                phi_off(pv, z, a, dp, dm) * psi * psi
            },
            0.0,
            l,
            &[zs],
            QuadOpts::rel(1e-12),
        );
        let s = (self.alpha - self.d as f64 - 1.0) + 2.0 * (self.alpha - 1.0);
        let psl = self.psi_profile(l, a);
        let tail = power_tail(self.varphi_profile(l, a) * psl * psl, l, s);
        let chain = span(
            |z, dp, dm| {
                let psi = self.psi_profile(z, a);
                phi_off(pv, z, a, dp, dm) * (psi * psi - ps * ps)
            },
            0.0,
            zs,
            &[],
            QuadOpts::rel(1e-12),
        );
        Ok((2.0 * (full.value + tail), 2.0 * chain.value))
    }

    /// Proportionality constant between `Θ` and its closed form over
    /// [`THETA_SAMPLES`] points.
    pub fn theta_proportionality(&self) -> Result<ThetaFit> {
        self.require_1d()?;
        let pts = theta_sample_points();
        let ratios: Vec<f64> =
            pts.iter().map(|&x| Ok(self.theta_direct(x)? / self.theta_closed_form(&[x]))).collect::<Result<_>>()?;
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(ThetaFit { c: mean, spread: (max - min) / mean.abs(), points: pts, ratios })
    }

    /// `2∫₀^∞ f Θ^k` with `Θ` from the direct quadrature at every node,
    /// plus a bound on the inner error propagated to the result.
    fn nested(&self, k: i32) -> Result<(f64, f64)> {
        let mut failed = None;
        let mut eval = |y: f64, dp: f64, dm: f64, bound: bool| match self.theta_quad(y) {
            Ok((t, e)) => {
                let f = self.f1(y, dp, dm);
                if bound {
                    (k as f64 * f * t.powi(k - 1) * e).abs()
                } else {
                    f * t.powi(k)
                }
            }
            Err(e) => {
                failed = Some(e);
                f64::NAN
            }
        };
        let l = OUTER_CUT;
        let tol = 1e-8;
        let outer = span(|y, dp, dm| eval(y, dp, dm, false), 0.0, l, &[], QuadOpts::rel(tol));
        // a coarse pass over the error density is enough for a bound
        let prop = span(|y, dp, dm| eval(y, dp, dm, true), 0.0, l, &[], QuadOpts::rel(1e-2).with_level(3));
        if let Some(e) = failed {
            return Err(e);
        }
        let t_l = self.theta_direct(l)?;
        let s = (self.alpha - 2.0) + k as f64 * (self.alpha - 1.0);
        let tail = power_tail(self.f1(l, l + 0.5, l - 0.5) * t_l.powi(k), l, s);
        let value = 2.0 * (outer.value + tail);
        // the level-difference estimate is heuristic; never claim better than the target
        let quad_err = (2.0 * outer.error).max(tol * value.abs());
        Ok((value, quad_err + 2.0 * prop.value.abs()))
    }

    /// `2∫₀^∞ f ψ^k` for the d = 1 closed-form shape.
    fn reduced(&self, k: i32) -> Quad {
        let pv = self.p_varphi();
        let l = OUTER_CUT;
        let q = span(
            |z, dp, dm| phi_off(pv, z, 0.0, dp, dm) * self.psi_profile(z, 0.0).powi(k),
            0.0,
            l,
            &[],
            QuadOpts::rel(1e-12),
        );
        let s = (self.alpha - 2.0) + k as f64 * (self.alpha - 1.0);
        let tail = power_tail(self.varphi_profile(l, 0.0) * self.psi_profile(l, 0.0).powi(k), l, s);
        Quad { value: 2.0 * (q.value + tail), error: 2.0 * q.error, evals: q.evals }
    }

    /// `∫∫ ln(1/|u₁-u₂|) f(u₁) f(u₂)` by two routes: nested through the
    /// direct `Θ`, and through the fitted closed form.
    pub fn base_log_integral(&self, fit: &ThetaFit) -> Result<TwoRoute> {
        self.require_1d()?;
        let (d, de) = self.nested(1)?;
        let r = self.reduced(1);
        let reduced = -fit.c * r.value;
        Ok(TwoRoute {
            direct: -d,
            direct_error: de,
            reduced,
            reduced_error: fit.c.abs() * r.error + reduced.abs() * fit.spread,
        })
    }

    /// `I = ∫ f Θ²` directly, and as `c² ∫ φψ²` through the profiles
    /// (the transverse parameter vanishes in d = 1).
    pub fn third_moment_integral(&self, fit: &ThetaFit) -> Result<TwoRoute> {
        self.require_1d()?;
        let (direct, direct_error) = self.nested(2)?;
        let r = self.reduced(2);
        let c2 = fit.c * fit.c;
        let reduced = c2 * r.value;
        Ok(TwoRoute { direct, direct_error, reduced, reduced_error: c2 * r.error + 2.0 * fit.spread * reduced.abs() })
    }
}

/// 50 points on both sides of the kernel, away from `±1/2`.
fn theta_sample_points() -> Vec<f64> {
    let half = THETA_SAMPLES / 2;
    let mut v = Vec::with_capacity(THETA_SAMPLES);
    for i in 0..half {
        let x = 0.03 + 8.0 * (i as f64 / (half - 1) as f64).powi(2) + 0.0137 * i as f64;
        v.push(x);
        v.push(-x * 1.01);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub c: f64,
    /// `(max - min)/|mean|` of the ratios.
    pub spread: f64,
    pub points: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// One quantity computed along two independent routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoRoute {
    pub direct: f64,
    pub direct_error: f64,
    pub reduced: f64,
    pub reduced_error: f64,
}

impl TwoRoute {
    pub fn agree(&self) -> bool {
        (self.direct - self.reduced).abs() <= self.direct_error + self.reduced_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileCheck {
    pub a: f64,
    pub z_star: f64,
    pub varphi_integral: f64,
}

/// `(2l)!/2^l · B^l` for the base log integral `B` (d = 1).
pub fn even_order_leading_term(l: usize, alpha: f64, d: usize) -> Result<f64> {
    if l == 0 {
        return Err(Error::OrderOutOfRange("l >= 1".into()));
    }
    let ctx = AppendixContext::new(d, alpha)?;
    let fit = ctx.theta_proportionality()?;
    let b = ctx.base_log_integral(&fit)?.direct;
    if !(b > 0.0) {
        return Err(Error::ProfileSignStructureViolated(format!("base log integral {b} is not positive")));
    }
    Ok(leading_term_from_base(l, b))
}

/// `(2l)!/2^l · base^l`.
pub fn leading_term_from_base(l: usize, base: f64) -> f64 {
    let fact: f64 = (1..=2 * l).map(|k| k as f64).product();
    fact / 2f64.powi(l as i32) * base.powi(l as i32)
}

/// `(I, verdict)`: `I` from the direct route and whether both routes are
/// positive and agree within their combined errors.
pub fn third_moment_positivity(alpha: f64, d: usize) -> Result<(f64, bool)> {
    let ctx = AppendixContext::new(d, alpha)?;
    let fit = ctx.theta_proportionality()?;
    let i = ctx.third_moment_integral(&fit)?;
    Ok((i.direct, i.direct > 0.0 && i.reduced > 0.0 && i.agree()))
}

/// One verified statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixClaim {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub d: usize,
    pub alpha: f64,
    pub claims: Vec<AppendixClaim>,
    pub pass: bool,
}

/// Transverse parameter of the profile checks.
pub const PROFILE_A: f64 = 0.25;

fn claim(name: &str, value: f64, tolerance: f64, pass: bool, detail: String) -> AppendixClaim {
    AppendixClaim { name: name.into(), value, tolerance, pass, detail }
}

/// All claims for d = 1 and one `α`.
pub fn appendix_report(alpha: f64) -> Result<AppendixReport> {
    let ctx = AppendixContext::new(1, alpha)?;
    let mut claims = Vec::new();

    let fi = ctx.f_integral()?;
    claims.push(claim("f_integral_zero", fi, 1e-8, fi.abs() < 1e-8, "∫f".into()));
    let even = [0.1, 0.37, 0.5 + 1e-3, 1.3, 7.0]
        .iter()
        .map(|&u| (ctx.f_kernel(&[u]) - ctx.f_kernel(&[-u])).abs() / ctx.f_kernel(&[u]).abs())
        .fold(0.0, f64::max);
    claims.push(claim("f_even", even, 1e-12, even < 1e-12, "max relative |f(u) - f(-u)|".into()));

    let fit = ctx.theta_proportionality()?;
    claims.push(claim(
        "theta_proportionality_spread",
        fit.spread,
        1e-3,
        fit.spread < 1e-3,
        format!("c = {:.10e} over {} points", fit.c, fit.points.len()),
    ));
    let th_even = [0.2, 0.9, 3.0]
        .iter()
        .map(|&x| Ok((ctx.theta_direct(x)? - ctx.theta_direct(-x)?).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    claims.push(claim("theta_even", th_even, 1e-8, th_even < 1e-8, "max |Θ(x) - Θ(-x)|".into()));

    let base = ctx.base_log_integral(&fit)?;
    claims.push(claim("base_log_integral_positive", base.direct, 0.0, base.direct > 0.0, format!("{base:?}")));
    let rel = (base.direct - base.reduced).abs() / base.direct.abs();
    claims.push(claim("base_log_integral_fubini", rel, 1e-3, rel < 1e-3, "relative gap between the two routes".into()));
    let lead2 = leading_term_from_base(2, base.direct);
    claims.push(claim("even_leading_term_l2", lead2, 0.0, lead2 > 0.0, "(4!/4)·B²".into()));

    let i = ctx.third_moment_integral(&fit)?;
    claims.push(claim("third_moment_positive", i.direct, 0.0, i.direct > 0.0 && i.reduced > 0.0, format!("{i:?}")));
    claims.push(claim(
        "third_moment_two_routes",
        (i.direct - i.reduced).abs(),
        i.direct_error + i.reduced_error,
        i.agree(),
        "direct ∫fΘ² vs c²∫φψ²".into(),
    ));

    let prof = ctx.check_profiles(PROFILE_A);
    match prof {
        Ok(pc) => {
            claims.push(claim("z_star_above_half", pc.z_star, 0.5, pc.z_star > 0.5, format!("a = {}", pc.a)));
            claims.push(claim(
                "varphi_integral_zero",
                pc.varphi_integral,
                1e-6,
                pc.varphi_integral.abs() < 1e-6,
                format!("a = {}", pc.a),
            ));
        }
        Err(e) => claims.push(claim("profile_sign_structure", f64::NAN, 0.0, false, e.to_string())),
    }
    let (full, chain) = ctx.bound_chain(PROFILE_A)?;
    claims.push(claim(
        "bound_chain",
        chain,
        full,
        chain > 0.0 && chain <= full * (1.0 + 1e-10),
        format!("0 < {chain:.6e} ≤ {full:.6e}"),
    ));

    let pass = claims.iter().all(|c| c.pass);
    Ok(AppendixReport { d: 1, alpha, claims, pass })
}

/// Profile sign-structure spot check in dimension `d` (no log integrals).
pub fn profile_report(d: usize, alpha: f64, a_values: &[f64]) -> Result<AppendixReport> {
    let ctx = AppendixContext::new(d, alpha)?;
    let mut claims = Vec::new();
    for &a in a_values {
        match ctx.check_profiles(a) {
            Ok(pc) => {
                claims.push(claim("z_star_above_half", pc.z_star, 0.5, pc.z_star > 0.5, format!("a = {a}")));
                claims.push(claim("varphi_integral_zero", pc.varphi_integral, 1e-6, pc.varphi_integral.abs() < 1e-6, format!("a = {a}")));
            }
            Err(e) => claims.push(claim("profile_sign_structure", f64::NAN, 0.0, false, format!("a = {a}: {e}"))),
        }
        let (full, chain) = ctx.bound_chain(a)?;
        claims.push(claim("bound_chain", chain, full, chain > 0.0 && chain <= full * (1.0 + 1e-10), format!("a = {a}")));
    }
    let pass = claims.iter().all(|c| c.pass);
    Ok(AppendixReport { d, alpha, claims, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_difference_matches_naive_form() {
        for &(p, a) in &[(0.6, 0.0), (0.6, 0.25), (0.25, 0.0), (1.1, 0.3)] {
            for &z in &[2.5, 7.0, -3.0, 40.0] {
                let naive = h(p, z + 0.5, a) - h(p, z - 0.5, a);
                let s = phi_p(p, z, a);
                assert!((s - naive).abs() <= 1e-12 * naive.abs(), "p={p} a={a} z={z}: {s} vs {naive}");
            }
        }
    }

    #[test]
    fn leading_term_arithmetic() {
        assert_eq!(leading_term_from_base(2, 0.5), 6.0 * 0.25);
        assert_eq!(leading_term_from_base(1, 0.5), 0.5);
    }
}
