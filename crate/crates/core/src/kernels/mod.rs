//! Deterministic kernels: the singular power kernels, their mollified
//! versions, the log-correlation `rho = k1 * k1` and the normalization
//! constants derived from them.

pub mod radial;

pub use radial::{radial_conv, Below, Radial, RadialTable};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOpts};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Surface area of the unit sphere in dimension `d`.
pub fn omega_d(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            let h = d as f64 / 2.0;
            2.0 * PI.powf(h) / gamma_fn(h)
        }
    }
}

// Lanczos approximation, only used for d > 3.
fn gamma_fn(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `inf(1, |x|)`.
pub fn clamp_norm(r: f64) -> f64 {
    r.min(1.0)
}

/// `ln⁺(1/r) = max(ln(1/r), 0)`.
pub fn ln_plus_inv(r: f64) -> f64 {
    (-r.ln()).max(0.0)
}

/// The parameter tuple of every field family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub d: usize,
    /// Correlation length.
    pub r: f64,
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma0_star: f64,
    /// Intermittency of the X0 family (and of the Biot–Savart exponent).
    pub gamma0: f64,
    pub epsilon: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams { d: 1, r: 1.0, alpha: 0.8, gamma1: 0.0, gamma0_star: 0.0, gamma0: 0.0, epsilon: 1.0 / 256.0 }
    }
}

impl FieldParams {
    pub fn omega_d(&self) -> f64 {
        omega_d(self.d)
    }

    /// Effective asymmetry amplitude of the X family at scale epsilon.
    pub fn gamma0_eps(&self) -> f64 {
        let w = self.omega_d() * self.gamma1 * self.gamma1;
        self.gamma0_star * (self.epsilon / self.r).powf((self.d as f64 - w) / 2.0)
    }

    /// `gamma1^2 * omega_d`.
    pub fn lambda1(&self) -> f64 {
        self.gamma1 * self.gamma1 * self.omega_d()
    }

    /// `gamma0^2 * omega_d`.
    pub fn lambda0(&self) -> f64 {
        self.gamma0 * self.gamma0 * self.omega_d()
    }

    pub fn basic_validity(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::ParameterGateViolated("d >= 1".into()));
        }
        if !(self.r > 0.0) {
            return Err(Error::ParameterGateViolated("R > 0".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.r) {
            return Err(Error::ParameterGateViolated("0 < epsilon < R".into()));
        }
        if self.gamma1 < 0.0 || self.gamma0 < 0.0 || self.gamma0_star < 0.0 {
            return Err(Error::ParameterGateViolated("intermittency parameters must be >= 0".into()));
        }
        Ok(())
    }

    /// Standing assumptions of the X family.
    pub fn check_x_family(&self) -> Result<()> {
        self.basic_validity()?;
        let h = self.d as f64 / 2.0;
        let top = (h + 1.0).min(self.d as f64);
        if !(self.alpha > h && self.alpha < top) {
            return Err(Error::ParameterGateViolated(format!(
                "d/2 < α < min(d/2+1, d) fails: α = {}, d = {}",
                self.alpha, self.d
            )));
        }
        if !(self.lambda1() < self.d as f64) {
            return Err(Error::ParameterGateViolated("ω_dγ₁² < d".into()));
        }
        Ok(())
    }

    /// Standing assumptions of the X0 family.
    pub fn check_x0_family(&self) -> Result<()> {
        self.basic_validity()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::ParameterGateViolated(format!("0 < α < 1 fails: α = {}", self.alpha)));
        }
        if !(self.gamma0 > 0.0) {
            return Err(Error::ParameterGateViolated("γ₀ > 0 (the X₀ normalization is unsolvable at γ₀ = 0)".into()));
        }
        Ok(())
    }
}

/// Radial mollifier profiles. Both are smooth, supported in the unit ball
/// and normalized to unit mass in the dimension they are used in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mollifier {
    /// `exp(-1/(1 - r^2))`
    #[default]
    Bump,
    /// `exp(-2/(1 - r^2))`, more concentrated near the origin.
    SharpBump,
}

impl Mollifier {
    /// Unnormalized profile.
    pub fn shape(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let s = match self {
            Mollifier::Bump => 1.0,
            Mollifier::SharpBump => 2.0,
        };
        (-s / (1.0 - r * r)).exp()
    }

    /// Constant making `c * shape(|u|)` a probability density on R^d.
    pub fn norm_const(self, d: usize) -> f64 {
        let q = integrate(|r: f64| self.shape(r) * r.powi(d as i32 - 1), 0.0, 1.0, &[], QuadOpts::rel(1e-14));
        1.0 / (omega_d(d) * q.value)
    }
}

fn h_exp(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth radial cutoff: 1 on [0, 1], 0 beyond 2.
pub fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let a = h_exp(2.0 - r);
    a / (a + h_exp(r - 1.0))
}

/// Derived constants of a suite.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Constants {
    /// `∫_{|u|<=1} θ(u)/|u|^{d/2} du`
    pub c0: f64,
    /// Limit of `rho_{ε/R}(0) - ω_d ln(R/ε)`.
    pub c1: f64,
    /// Slope of the linear-in-ε remainder fitted with C1.
    pub c1_slope: f64,
    /// `(ε/R, rho_{ε/R}(0) - ω_d ln(R/ε))` along the ladder.
    pub c1_ladder: Vec<(f64, f64)>,
    /// `rho_{ε/R}(0)` at the suite's epsilon.
    pub rho_eps0: f64,
    pub ceps_x: f64,
    /// Absent when γ₀ = 0.
    pub ceps_x0: Option<f64>,
    pub cconst: f64,
}

/// All kernels of one parameter set, with their radial tables.
#[derive(Debug, Clone)]
pub struct KernelSuite {
    pub params: FieldParams,
    pub profile: Mollifier,
    theta_c: f64,
    rho: Option<RadialTable>,
    rho_eps: Option<RadialTable>,
    k_eps: Option<RadialTable>,
    norm_eps: Option<RadialTable>,
    pub constants: Option<Constants>,
}

const TABLE_NODES: usize = 512;
const TABLE_RMIN: f64 = 1e-6;

impl KernelSuite {
    /// Suite without tables; only the closed-form kernels are usable.
    pub fn new(params: FieldParams, profile: Mollifier) -> Self {
        KernelSuite {
            params,
            profile,
            theta_c: profile.norm_const(params.d),
            rho: None,
            rho_eps: None,
            k_eps: None,
            norm_eps: None,
            constants: None,
        }
    }

    fn d(&self) -> usize {
        self.params.d
    }

    fn half_d(&self) -> f64 {
        self.params.d as f64 / 2.0
    }

    /// Normalized mollifier at radius `r`.
    pub fn theta(&self, r: f64) -> f64 {
        self.theta_c * self.profile.shape(r)
    }

    /// `θ(·/ε)/ε^d` at radius `r`.
    pub fn theta_eps(&self, r: f64, eps: f64) -> f64 {
        self.theta(r / eps) / eps.powi(self.d() as i32)
    }

    /// `k^R` with an infinite sentinel at the origin.
    pub fn eval_kr(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        if r == 0.0 {
            f64::INFINITY
        } else if r <= self.params.r {
            r.powf(-self.half_d())
        } else {
            0.0
        }
    }

    /// Radial part of `φ_R`, i.e. `R^{d/2-α} cutoff(r/R)`.
    pub fn phi_r(&self, r: f64) -> f64 {
        self.params.r.powf(self.half_d() - self.params.alpha) * cutoff(r / self.params.r)
    }

    /// `F_R(y) = y * fr_radial(|y|)` with the raw norm.
    pub fn fr_radial(&self, r: f64) -> f64 {
        self.phi_r(r) / r.powf(self.d() as f64 - self.params.alpha + 1.0)
    }

    /// Component `j` of `F_R`.
    pub fn eval_fr(&self, y: &[f64], j: usize) -> f64 {
        let r = norm(y);
        if r == 0.0 || r >= 2.0 * self.params.r {
            0.0
        } else {
            y[j] * self.fr_radial(r)
        }
    }

    /// Mollified-norm version of `fr_radial`; needs the norm table.
    pub fn fr_eps_radial(&self, r: f64) -> Result<f64> {
        let n = self.norm_eps_radial(r)?;
        Ok(self.phi_r(r) / n.powf(self.d() as f64 - self.params.alpha + 1.0))
    }

    /// Component `j` of `ψ(y) = cutoff(|y|) y/|y|^{d-α+1}`.
    pub fn eval_psi(&self, y: &[f64], j: usize) -> f64 {
        let r = norm(y);
        if r == 0.0 {
            0.0
        } else {
            cutoff(r) * y[j] / r.powf(self.d() as f64 - self.params.alpha + 1.0)
        }
    }

    /// Vector kernel `x/|x|^{1+d/2} 1_{|x|<=R}`.
    pub fn eval_kr_vec(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        if r == 0.0 || r > self.params.r {
            return vec![0.0; x.len()];
        }
        let s = r.powf(-1.0 - self.half_d());
        x.iter().map(|v| v * s).collect()
    }

    /// Direct quadrature of `(θ^e * k^1)(r)` in unit-R coordinates.
    pub fn k_eps_unit_direct(&self, r: f64, e: f64) -> f64 {
        let d = self.d();
        let hd = self.half_d();
        let th = |s: f64| self.theta_eps(s, e);
        let k1 = |s: f64| if s <= 1.0 { s.powf(-hd) } else { 0.0 };
        let g3 = |t: f64| 2.0 * t.min(1.0).sqrt();
        let f = Radial::new(&th, e, vec![]);
        let mut g = Radial::new(&k1, 1.0, vec![0.0]);
        if d == 3 {
            g = g.with_antideriv(&g3);
        }
        radial_conv(d, &f, &g, r, QuadOpts::rel(1e-12)).value
    }

    /// Direct quadrature of the mollified norm `(θ^ε * |·|)(r)`.
    pub fn norm_eps_direct(&self, r: f64, eps: f64) -> f64 {
        let d = self.d();
        if d == 1 && r >= eps {
            return r;
        }
        let th = |s: f64| self.theta_eps(s, eps);
        let id = |s: f64| s;
        let g3 = |t: f64| t * t * t / 3.0;
        let f = Radial::new(&th, eps, vec![]);
        let mut g = Radial::new(&id, f64::INFINITY, vec![]);
        if d == 3 {
            g = g.with_antideriv(&g3);
        }
        radial_conv(d, &f, &g, r, QuadOpts::rel(1e-12)).value
    }

    /// `rho_e(0) = ∫ (θ^e * k^1)^2` in unit-R coordinates, by nested quadrature.
    pub fn rho_eps0_direct(&self, e: f64) -> f64 {
        let d = self.d();
        let br = [e, 1.0 - e, 1.0 + e, 2.0 * e];
        let q = integrate(
            |s: f64| {
                let k = self.k_eps_unit_direct(s, e);
                s.powi(d as i32 - 1) * k * k
            },
            0.0,
            1.0 + e,
            &br,
            QuadOpts::rel(1e-11),
        );
        omega_d(d) * q.value
    }

    /// Builds every radial table.
    pub fn build_tables(&mut self) {
        let d = self.d();
        let w = omega_d(d);
        let hd = self.half_d();
        let e = self.params.epsilon / self.params.r;
        let opts = QuadOpts::rel(1e-10);

        // rho = k1 * k1 on [0, 2]
        let k1 = |s: f64| if s <= 1.0 { s.powf(-hd) } else { 0.0 };
        let g3 = |t: f64| 2.0 * t.min(1.0).sqrt();
        let extra: Vec<f64> = (1..32).map(|i| 0.9 + 0.2 * i as f64 / 32.0).collect();
        let rn = RadialTable::nodes(TABLE_NODES, TABLE_RMIN, 2.0, &extra);
        let rv: Vec<f64> = rn
            .iter()
            .map(|&r| {
                let f = Radial::new(&k1, 1.0, vec![0.0]);
                let mut g = Radial::new(&k1, 1.0, vec![0.0]);
                if d == 3 {
                    g = g.with_antideriv(&g3);
                }
                radial_conv(d, &f, &g, r, opts).value
            })
            .collect();
        self.rho = Some(RadialTable::from_values(&rn, rv, 2.0, Below::Log(w)));

        // k_eps in unit-R coordinates, refined across the support edge
        let ke_sup = 1.0 + e;
        let mut extra: Vec<f64> = (0..=64).map(|i| 1.0 - 2.0 * e + 3.0 * e * i as f64 / 64.0).collect();
        extra.extend((0..=32).map(|i| e * 2.0 * i as f64 / 32.0));
        let kn = RadialTable::nodes(TABLE_NODES, TABLE_RMIN.min(e * 1e-3), ke_sup, &extra);
        let kv: Vec<f64> = kn.iter().map(|&r| self.k_eps_unit_direct(r, e)).collect();
        let kv0 = kv[0];
        let k_tab = RadialTable::from_values(&kn, kv, ke_sup, Below::Flat);

        // rho_eps = k_eps * k_eps
        let re_sup = 2.0 + 2.0 * e;
        let mut extra: Vec<f64> = (0..=32).map(|i| 4.0 * e * i as f64 / 32.0).collect();
        extra.extend((1..32).map(|i| 0.9 + 0.2 * i as f64 / 32.0));
        let ren = RadialTable::nodes(TABLE_NODES, TABLE_RMIN.min(e * 1e-3), re_sup, &extra);
        let kt = |s: f64| k_tab.eval(s);
        // cumulative ∫_0^t τ k(τ) dτ on the k nodes, for the 3-D formula
        let mut g_nodes = Vec::with_capacity(kn.len());
        let mut acc = 0.5 * k_tab.eval(kn[0]) * kn[0] * kn[0];
        g_nodes.push(acc);
        for w in kn.windows(2) {
            acc += integrate(|t: f64| t * kt(t), w[0], w[1], &[], QuadOpts::rel(1e-12)).value;
            g_nodes.push(acc);
        }
        let g_total = acc + integrate(|t: f64| t * kt(t), kn[kn.len() - 1], ke_sup, &[], QuadOpts::rel(1e-12)).value;
        let g_tab = RadialTable::from_values(&kn, g_nodes, ke_sup, Below::Flat);
        let k_first = kv0;
        let r_first = kn[0];
        let g_anti = |t: f64| {
            if t >= ke_sup {
                g_total
            } else if t <= r_first {
                0.5 * k_first * t * t
            } else {
                g_tab.eval(t)
            }
        };
        // the nested 2-D rule converges slowly on interpolated input, so the
        // level is capped; errors stay near the interpolation error
        let rev: Vec<f64> = ren
            .iter()
            .map(|&r| {
                let f = Radial::new(&kt, ke_sup, vec![e, 1.0 - e, 1.0]);
                let mut g = Radial::new(&kt, ke_sup, vec![e, 1.0 - e, 1.0]);
                if d == 3 {
                    g = g.with_antideriv(&g_anti);
                }
                radial_conv(d, &f, &g, r, QuadOpts::rel(1e-8).with_level(4)).value
            })
            .collect();
        self.rho_eps = Some(RadialTable::from_values(&ren, rev, re_sup, Below::Flat));
        self.k_eps = Some(k_tab);

        // mollified norm, physical units, up to the F_R support
        let eps = self.params.epsilon;
        let n_sup = 2.0 * self.params.r + eps;
        let extra: Vec<f64> = (0..=32).map(|i| 2.0 * eps * i as f64 / 32.0).collect();
        let nn = RadialTable::nodes(TABLE_NODES, eps * 1e-4, n_sup, &extra);
        let nv: Vec<f64> = nn.iter().map(|&r| self.norm_eps_direct(r, eps)).collect();
        self.norm_eps = Some(RadialTable::from_values(&nn, nv, n_sup, Below::Flat));
    }

    pub fn tables_built(&self) -> bool {
        self.rho.is_some()
    }

    pub fn rho_table(&self) -> Result<&RadialTable> {
        self.rho.as_ref().ok_or(Error::TableNotBuilt("rho"))
    }

    /// Table of `rho_{ε/R}`, radius in unit-R coordinates.
    pub fn rho_eps_table(&self) -> Result<&RadialTable> {
        self.rho_eps.as_ref().ok_or(Error::TableNotBuilt("rho_eps"))
    }

    /// `rho(x) = (k1 * k1)(x)`, argument in unit-R coordinates.
    pub fn eval_rho(&self, x: &[f64]) -> Result<f64> {
        self.rho_radial(norm(x))
    }

    pub fn rho_radial(&self, r: f64) -> Result<f64> {
        Ok(self.rho_table()?.eval(r))
    }

    /// `d rho / dr`.
    pub fn rho_deriv(&self, r: f64) -> Result<f64> {
        Ok(self.rho_table()?.deriv(r))
    }

    /// `rho(x) - ω_d ln⁺(1/|x|)`.
    pub fn phi_remainder(&self, x: &[f64]) -> Result<f64> {
        let r = norm(x);
        Ok(self.rho_radial(r)? - omega_d(self.d()) * ln_plus_inv(r))
    }

    /// `rho_{ε/R}(x)`, argument in unit-R coordinates.
    pub fn eval_rho_eps(&self, x: &[f64]) -> Result<f64> {
        Ok(self.rho_eps.as_ref().ok_or(Error::TableNotBuilt("rho_eps"))?.eval(norm(x)))
    }

    /// `k_ε^R(x)`, physical units.
    pub fn eval_kr_eps(&self, x: &[f64]) -> Result<f64> {
        self.kr_eps_radial(norm(x))
    }

    pub fn kr_eps_radial(&self, r: f64) -> Result<f64> {
        let t = self.k_eps.as_ref().ok_or(Error::TableNotBuilt("kR_eps"))?;
        Ok(self.params.r.powf(-self.half_d()) * t.eval(r / self.params.r))
    }

    /// `|x|_ε`, physical units.
    pub fn eval_norm_eps(&self, x: &[f64]) -> Result<f64> {
        self.norm_eps_radial(norm(x))
    }

    pub fn norm_eps_radial(&self, r: f64) -> Result<f64> {
        let t = self.norm_eps.as_ref().ok_or(Error::TableNotBuilt("norm_eps"))?;
        if r >= t.support() {
            // beyond every F_R support; the raw norm is then exact up to O(ε²/r)
            return Ok(r);
        }
        Ok(t.eval(r))
    }

    /// `C0 = ∫_{|u|<=1} θ(u)/|u|^{d/2} du`.
    pub fn c0(&self) -> f64 {
        let d = self.d();
        let p = d as f64 - 1.0 - self.half_d();
        let q = integrate(|r: f64| self.theta(r) * r.powf(p), 0.0, 1.0, &[], QuadOpts::rel(1e-14));
        omega_d(d) * q.value
    }

    /// Radial tables as `(name, radius, value)` rows for CSV export.
    pub fn table_rows(&self) -> Vec<(&'static str, f64, f64)> {
        let mut out = Vec::new();
        for (name, t) in [("rho", &self.rho), ("rho_eps", &self.rho_eps), ("kR_eps_unit", &self.k_eps), ("norm_eps", &self.norm_eps)] {
            if let Some(t) = t {
                for (r, v) in t.radii().zip(t.values()) {
                    out.push((name, r, *v));
                }
            }
        }
        out
    }
}

/// Tolerance on the change between the last two extrapolated C1 values.
pub const C1_TOL: f64 = 1e-4;

/// Ladder `ε/R = 2^{-k}`, k = 4..12, of `rho_{ε/R}(0) - ω_d ln(R/ε)`.
///
/// The residual approaches C1 linearly in ε, so consecutive rungs are
/// combined by Richardson extrapolation and the Cauchy test applies to the
/// extrapolated sequence. Returns `(C1, slope, ladder)`, the slope being
/// that of a linear fit over the last four rungs.
pub fn estimate_c1(suite: &KernelSuite) -> Result<(f64, f64, Vec<(f64, f64)>)> {
    let w = omega_d(suite.params.d);
    let ladder: Vec<(f64, f64)> = (4..=12)
        .map(|k| {
            let e = 2f64.powi(-k);
            (e, suite.rho_eps0_direct(e) - w * (1.0 / e).ln())
        })
        .collect();
    let rich: Vec<f64> = ladder.windows(2).map(|p| 2.0 * p[1].1 - p[0].1).collect();
    let n = rich.len();
    let change = (rich[n - 1] - rich[n - 2]).abs();
    if !(change < C1_TOL) {
        return Err(Error::ExtrapolationDiverged { change, tol: C1_TOL });
    }
    let (_, slope) = linear_fit(&ladder[ladder.len() - 4..]);
    Ok((rich[n - 1], slope, ladder))
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Builds the tables and fills every derived constant.
pub fn derive_constants(params: FieldParams, profile: Mollifier) -> Result<KernelSuite> {
    params.basic_validity()?;
    let mut s = KernelSuite::new(params, profile);
    s.build_tables();
    let c0 = s.c0();
    let (c1, c1_slope, c1_ladder) = estimate_c1(&s)?;
    let e = params.epsilon / params.r;
    let rho_eps0 = s.rho_eps0_direct(e);
    let g0e = params.gamma0_eps();
    let ceps_x = (g0e * g0e + params.gamma1 * params.gamma1) * rho_eps0;
    let ceps_x0 = if params.gamma0 > 0.0 {
        let k0 = c0 / params.epsilon.powf(params.d as f64 / 2.0);
        Some(x0_normalization(params.gamma0, k0, rho_eps0))
    } else {
        None
    };
    let cconst = params.gamma0_star * c0 * (-0.5 * params.gamma1 * params.gamma1 * c1).exp()
        / params.r.powf(params.d as f64 / 2.0);
    s.constants = Some(Constants { c0, c1, c1_slope, c1_ladder, rho_eps0, ceps_x, ceps_x0, cconst });
    Ok(s)
}

/// Solves `γ k0 e^{-C + γ² v/2} = 1` for C.
pub fn x0_normalization(gamma: f64, k0: f64, v: f64) -> f64 {
    (gamma * k0).ln() + 0.5 * gamma * gamma * v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> FieldParams {
        FieldParams { d: 1, r: 1.0, alpha: 0.8, epsilon: 0.1, ..Default::default() }
    }

    #[test]
    fn kr_examples() {
        let s = KernelSuite::new(p1(), Mollifier::Bump);
        assert!((s.eval_kr(&[0.25]) - 2.0).abs() < 1e-15);
        assert!(s.eval_kr(&[0.0]).is_infinite());
        let s2 = KernelSuite::new(FieldParams { d: 2, ..p1() }, Mollifier::Bump);
        assert_eq!(s2.eval_kr(&[1.5, 0.0]), 0.0);
        let s3 = KernelSuite::new(FieldParams { d: 3, r: 2.0, ..p1() }, Mollifier::Bump);
        assert!((s3.eval_kr(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mollifier_mass_is_one() {
        for d in 1..=3 {
            for m in [Mollifier::Bump, Mollifier::SharpBump] {
                let c = m.norm_const(d);
                let q = integrate(|r: f64| c * m.shape(r) * r.powi(d as i32 - 1), 0.0, 1.0, &[], QuadOpts::rel(1e-13));
                assert!((omega_d(d) * q.value - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(2.0), 0.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let c = cutoff(1.0 + i as f64 / 100.0);
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn omega_matches_closed_forms() {
        assert_eq!(omega_d(1), 2.0);
        assert!((omega_d(4) - 2.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn tables_required() {
        let s = KernelSuite::new(p1(), Mollifier::Bump);
        assert_eq!(s.eval_rho(&[0.5]), Err(Error::TableNotBuilt("rho")));
        assert!(s.eval_kr_eps(&[0.5]).is_err());
    }

    #[test]
    fn x0_normalization_identity() {
        let (g, k0, v) = (0.3, 7.5, 4.2);
        let c = x0_normalization(g, k0, v);
        assert!((g * k0 * (-c + g * g * v / 2.0).exp() - 1.0).abs() < 1e-12);
    }
}
