//! Moment integrals of the chaos, X and X₀ families, their closed-form
//! scaling exponents and the increment-kernel bound exponents.
//!
//! Every moment reduces to block integrals
//! `∫ ∏ g_i(y_i) ∏_{i<j} P(c_ij, y_i - y_j) dy` where the pair factor is
//! either `exp(c ρ(Δ/R)) = e^{cφ(Δ/R)}/|Δ/R|_*^{cω_d}` or the pure power
//! `|Δ|^{-cω_d}` of the rescaled small-lag limits.

use crate::error::{Error, Result};
use crate::gaussian_oracle::WickCoefficients;
use crate::kernels::{cutoff, norm, omega_d, FieldParams, KernelSuite, Mollifier, RadialTable};
use crate::quad::{integrate, QuadOpts};
use crate::synthesis::run_indexed;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Largest supported dimension (stack buffers).
const MAX_D: usize = 8;

/// Largest block handled by tensor quadrature.
pub const TENSOR_MAX_VARS: usize = 2;

const MC_BATCH: usize = 4096;
const HYBRID_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentFamily {
    Chaos,
    XFamilyEven,
    XFamilyOdd,
    X0Family,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TensorQuadrature,
    ImportanceMc,
}

/// Catalog of integrands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrand {
    /// Indicator of the cube `[lo, hi]^d`.
    BoxIndicator { lo: f64, hi: f64 },
    /// Component `j` of `F_R`.
    Kernel { component: usize },
    /// `f_h(y) = F_R^j(y) - F_R^j(y - h)`.
    Increment { component: usize, lag: Vec<f64> },
    /// `u^j/|u|^{d-α+1} - (u^j - e^j)/|u - e|^{d-α+1}`, no cutoff, integrated
    /// over the whole space.
    UnitIncrement { component: usize, direction: Vec<f64> },
}

impl Integrand {
    fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        match self {
            Integrand::BoxIndicator { lo, hi } if !(lo < hi) => bad("box indicator needs lo < hi"),
            Integrand::Kernel { component } if *component >= d => bad("component out of range"),
            Integrand::Increment { component, lag } if *component >= d || lag.len() != d => {
                bad("increment component or lag dimension mismatch")
            }
            Integrand::UnitIncrement { component, direction }
                if *component >= d || direction.len() != d || (norm(direction) - 1.0).abs() > 1e-12 =>
            {
                bad("unit increment needs a unit direction of dimension d")
            }
            _ => Ok(()),
        }
    }
}

/// Second function of the two-parameter cross moment
/// `E[(∫f dQ^{γ₁})^k (∫g dQ^{γ₂})^l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTerm {
    pub test_function: Integrand,
    pub order: usize,
}

/// Declarative description of one moment.
///
/// `order` is the power `k` for chaos moments, the half-order `l` for the X
/// family (moment `2l` or `2l+1`) and `q` for the X₀ family. `gammas` is
/// read by chaos moments only; the X families take their intermittency from
/// the suite parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub family: MomentFamily,
    pub order: usize,
    pub lag: Option<Vec<f64>>,
    pub component: usize,
    pub test_function: Option<Integrand>,
    pub gammas: Vec<f64>,
    pub cross: Option<CrossTerm>,
    /// Use the ε-mollified kernel `F_R` (mollified norm) in every factor and
    /// the mollified covariance `rho_ε` in every pair.
    pub mollified: bool,
}

impl MomentSpec {
    pub fn chaos(f: Integrand, k: usize, gamma: f64) -> Self {
        MomentSpec {
            family: MomentFamily::Chaos,
            order: k,
            lag: None,
            component: 0,
            test_function: Some(f),
            gammas: vec![gamma],
            cross: None,
            mollified: false,
        }
    }

    pub fn chaos_cross(f: Integrand, k: usize, gamma1: f64, g: Integrand, l: usize, gamma2: f64) -> Self {
        MomentSpec {
            cross: Some(CrossTerm { test_function: g, order: l }),
            gammas: vec![gamma1, gamma2],
            ..Self::chaos(f, k, gamma1)
        }
    }

    fn with_lag(family: MomentFamily, order: usize, lag: Vec<f64>, component: usize) -> Self {
        MomentSpec {
            family,
            order,
            lag: Some(lag),
            component,
            test_function: None,
            gammas: vec![],
            cross: None,
            mollified: false,
        }
    }

    pub fn x_even(l: usize, lag: Vec<f64>, component: usize) -> Self {
        Self::with_lag(MomentFamily::XFamilyEven, l, lag, component)
    }

    pub fn x_odd(l: usize, lag: Vec<f64>, component: usize) -> Self {
        Self::with_lag(MomentFamily::XFamilyOdd, l, lag, component)
    }

    pub fn x0(q: usize, lag: Vec<f64>, component: usize) -> Self {
        Self::with_lag(MomentFamily::X0Family, q, lag, component)
    }

    fn lag_vec(&self, d: usize) -> Result<&[f64]> {
        match &self.lag {
            Some(h) if h.len() == d && self.component < d => Ok(h),
            _ => Err(Error::Config("moment needs a lag of dimension d and a component < d".into())),
        }
    }
}

/// A moment value with an honest error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Difference between two resolutions plus the statistical term.
    pub abs_error: f64,
    pub method: Method,
    pub n_evals: u64,
}

impl MomentEstimate {
    fn exact(value: f64) -> Self {
        MomentEstimate { value, abs_error: f64::MIN_POSITIVE, method: Method::TensorQuadrature, n_evals: 0 }
    }

    fn scaled(self, c: f64) -> Self {
        MomentEstimate { value: c * self.value, abs_error: (c.abs() * self.abs_error).max(f64::MIN_POSITIVE), ..self }
    }

    fn plus(self, o: MomentEstimate) -> Self {
        MomentEstimate {
            value: self.value + o.value,
            abs_error: self.abs_error + o.abs_error,
            method: if self.method == Method::ImportanceMc || o.method == Method::ImportanceMc {
                Method::ImportanceMc
            } else {
                Method::TensorQuadrature
            },
            n_evals: self.n_evals + o.n_evals,
        }
    }
}

/// Accuracy and work knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Relative tolerance of the fine quadrature run.
    pub rel_tol: f64,
    /// Samples per Monte-Carlo block integral.
    pub mc_samples: usize,
    pub seed: u64,
    pub workers: usize,
    /// Forces a method; by default blocks of up to [`TENSOR_MAX_VARS`]
    /// variables in d = 1 use quadrature and the rest Monte Carlo.
    pub method: Option<Method>,
    /// Fails with `TargetAccuracyUnreached` when `abs_error` exceeds this
    /// fraction of `|value|`.
    pub max_rel_error: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { rel_tol: 1e-7, mc_samples: 1 << 18, seed: 0x5eed, workers: 1, method: None, max_rel_error: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PairLaw {
    /// `exp(c ρ(Δ/R))`
    Rho,
    /// `|Δ|^{-c ω_d}`
    Pure,
}

#[derive(Debug, Clone)]
struct Factor {
    f: Integrand,
    power: i32,
}

#[derive(Debug, Clone)]
struct Block {
    factors: Vec<Factor>,
    /// Multiplier `c_ij` of the pair law, lower triangle used.
    coupling: Vec<Vec<f64>>,
    pair: PairLaw,
}

impl Block {
    /// Factors grouped as `(integrand, power, group)` with a coupling
    /// per group pair.
    fn grouped(groups: &[(Integrand, i32, usize)], c: &dyn Fn(usize, usize) -> f64, pair: PairLaw) -> Block {
        let mut factors = Vec::new();
        let mut gid = Vec::new();
        for (g, (f, p, n)) in groups.iter().enumerate() {
            for _ in 0..*n {
                factors.push(Factor { f: f.clone(), power: *p });
                gid.push(g);
            }
        }
        let n = factors.len();
        let coupling = (0..n).map(|i| (0..n).map(|j| c(gid[i], gid[j])).collect()).collect();
        Block { factors, coupling, pair }
    }
}

enum Proposal {
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    /// Density `∝ |y - center|^{-beta}` on the ball of the given radius.
    Power { center: Vec<f64>, beta: f64, radius: f64 },
    /// Density `∝ |y - center|^{-d-nu}` outside the unit ball.
    Pareto { center: Vec<f64>, nu: f64 },
}

impl Proposal {
    fn sample(&self, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Proposal::Uniform { lo, hi } => lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect(),
            Proposal::Power { center, beta, radius } => {
                let r = radius * rng.random::<f64>().powf(1.0 / (d as f64 - beta));
                offset(center, r, d, rng)
            }
            Proposal::Pareto { center, nu } => {
                // 1 - U lies in (0, 1]
                let r = (1.0 - rng.random::<f64>()).powf(-1.0 / nu);
                offset(center, r, d, rng)
            }
        }
    }

    fn density(&self, y: &[f64]) -> f64 {
        match self {
            Proposal::Uniform { lo, hi } => {
                if y.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v <= b) {
                    1.0 / lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>()
                } else {
                    0.0
                }
            }
            Proposal::Power { center, beta, radius } => {
                let d = y.len() as f64;
                let r = dist(y, center);
                if r >= *radius {
                    0.0
                } else {
                    (d - beta) / (omega_d(y.len()) * radius.powf(d - beta)) * r.powf(-beta)
                }
            }
            Proposal::Pareto { center, nu } => {
                let r = dist(y, center);
                if r < 1.0 {
                    0.0
                } else {
                    nu / omega_d(y.len()) * r.powf(-nu - y.len() as f64)
                }
            }
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `center + r·ω` with `ω` uniform on the unit sphere.
fn offset(center: &[f64], r: f64, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dir: Vec<f64> = if d == 1 {
        vec![if rng.random::<bool>() { 1.0 } else { -1.0 }]
    } else {
        let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&g);
        g.into_iter().map(|v| v / n).collect()
    };
    center.iter().zip(dir).map(|(c, u)| c + r * u).collect()
}

/// Block-integral evaluator bound to one kernel suite.
struct Engine<'a> {
    suite: &'a KernelSuite,
    params: FieldParams,
    rho: Option<&'a RadialTable>,
    mollified: bool,
    opts: EvalOptions,
}

impl<'a> Engine<'a> {
    fn new(suite: &'a KernelSuite, mollified: bool, pair: PairLaw, opts: EvalOptions) -> Result<Self> {
        let d = suite.params.d;
        if d == 0 || d > MAX_D {
            return Err(Error::DimensionUnsupported(d));
        }
        // the mollified field is log-correlated through rho_ε instead of rho
        let rho = match (pair, mollified) {
            (PairLaw::Rho, false) => Some(suite.rho_table()?),
            (PairLaw::Rho, true) => Some(suite.rho_eps_table()?),
            (PairLaw::Pure, _) => None,
        };
        if mollified {
            suite.norm_eps_radial(0.0)?;
        }
        Ok(Engine { suite, params: suite.params, rho, mollified, opts })
    }

    fn d(&self) -> usize {
        self.params.d
    }

    fn fr(&self, y: &[f64], j: usize) -> f64 {
        if !self.mollified {
            return self.suite.eval_fr(y, j);
        }
        let r = norm(y);
        if r >= 2.0 * self.params.r {
            return 0.0;
        }
        y[j] * self.suite.fr_eps_radial(r).unwrap_or(0.0)
    }

    fn unit_power(&self, u: &[f64], j: usize) -> f64 {
        let r = norm(u);
        if r == 0.0 {
            0.0
        } else {
            u[j] / r.powf(self.d() as f64 - self.params.alpha + 1.0)
        }
    }

    fn base(&self, f: &Integrand, y: &[f64]) -> f64 {
        let mut buf = [0.0; MAX_D];
        match f {
            Integrand::BoxIndicator { lo, hi } => {
                if y.iter().all(|v| v >= lo && v <= hi) {
                    1.0
                } else {
                    0.0
                }
            }
            Integrand::Kernel { component } => self.fr(y, *component),
            Integrand::Increment { component, lag } => {
                let z = &mut buf[..y.len()];
                for ((z, a), b) in z.iter_mut().zip(y).zip(lag) {
                    *z = a - b;
                }
                self.fr(y, *component) - self.fr(z, *component)
            }
            Integrand::UnitIncrement { component, direction } => {
                let z = &mut buf[..y.len()];
                for ((z, a), b) in z.iter_mut().zip(y).zip(direction) {
                    *z = a - b;
                }
                self.unit_power(y, *component) - self.unit_power(z, *component)
            }
        }
    }

    fn factor(&self, f: &Factor, y: &[f64]) -> f64 {
        let v = self.base(&f.f, y);
        if f.power == 1 {
            v
        } else {
            v.powi(f.power)
        }
    }

    fn pair(&self, law: PairLaw, c: f64, r: f64) -> f64 {
        self.log_pair(law, c, r).exp()
    }

    fn log_pair(&self, law: PairLaw, c: f64, r: f64) -> f64 {
        if c == 0.0 {
            return 0.0;
        }
        match law {
            PairLaw::Rho => c * self.rho.expect("rho table").eval(r / self.params.r),
            PairLaw::Pure => -c * omega_d(self.d()) * r.ln(),
        }
    }

    /// Per-axis bounding interval of the integrand's support.
    fn bounds(&self, f: &Integrand) -> (Vec<f64>, Vec<f64>) {
        let d = self.d();
        let s = 2.0 * self.params.r;
        match f {
            Integrand::BoxIndicator { lo, hi } => (vec![*lo; d], vec![*hi; d]),
            Integrand::Kernel { .. } => (vec![-s; d], vec![s; d]),
            Integrand::Increment { lag, .. } => {
                (lag.iter().map(|h| h.min(0.0) - s).collect(), lag.iter().map(|h| h.max(0.0) + s).collect())
            }
            Integrand::UnitIncrement { .. } => (vec![f64::NEG_INFINITY; d], vec![f64::INFINITY; d]),
        }
    }

    /// Singular points of the integrand.
    fn centers(&self, f: &Integrand) -> Vec<Vec<f64>> {
        let d = self.d();
        match f {
            Integrand::BoxIndicator { .. } => vec![],
            Integrand::Kernel { .. } => vec![vec![0.0; d]],
            Integrand::Increment { lag, .. } => vec![vec![0.0; d], lag.clone()],
            Integrand::UnitIncrement { direction, .. } => vec![vec![0.0; d], direction.clone()],
        }
    }

    /// Radii of the singular proposals: the kernel support and, for small
    /// lags, a few lag lengths, since increments concentrate at that scale.
    fn scales(&self, b: &Block) -> Vec<f64> {
        let mut out = vec![if b.pair == PairLaw::Pure { 2.0 } else { 2.0 * self.params.r }];
        for f in &b.factors {
            if let Integrand::Increment { lag, .. } = &f.f {
                let h = 4.0 * norm(lag);
                if h < 0.5 * out[0] && !out.iter().any(|r| (r - h).abs() <= 1e-12 * h) {
                    out.push(h);
                }
            }
        }
        out
    }

    fn breaks_1d(&self, f: &Integrand) -> Vec<f64> {
        let r = self.params.r;
        match f {
            Integrand::BoxIndicator { lo, hi } => vec![*lo, *hi],
            Integrand::Kernel { .. } => vec![0.0, -r, r],
            Integrand::Increment { lag, .. } => vec![0.0, lag[0], -r, r, lag[0] - r, lag[0] + r],
            Integrand::UnitIncrement { direction, .. } => vec![0.0, direction[0]],
        }
    }

    fn eval_block(&self, b: &Block) -> Result<MomentEstimate> {
        let k = b.factors.len();
        if k == 0 {
            return Ok(MomentEstimate::exact(1.0));
        }
        let d = self.d();
        for f in &b.factors {
            if let Integrand::UnitIncrement { .. } = f.f {
                let decay = f.power as f64 * (d as f64 + 1.0 - self.params.alpha);
                if !(decay > d as f64) {
                    return Err(Error::IntegrabilityGateViolated(format!(
                        "rescaled increment to the power {} is not integrable at infinity",
                        f.power
                    )));
                }
            }
        }
        let method = self.opts.method.unwrap_or(if d == 1 && k <= TENSOR_MAX_VARS {
            Method::TensorQuadrature
        } else {
            Method::ImportanceMc
        });
        let est = match method {
            Method::TensorQuadrature => {
                if d != 1 {
                    return Err(Error::DimensionUnsupported(d));
                }
                // node counts multiply across nested levels, so deeper nests
                // get shallower rules
                let (lf, lc) = if k <= 2 { (8, 6) } else { (6, 5) };
                let fine = QuadOpts::rel(self.opts.rel_tol).with_level(lf);
                let coarse = QuadOpts::rel(self.opts.rel_tol * 100.0).with_level(lc);
                let mut evals = 0u64;
                let vf = self.nest(b, &mut Vec::with_capacity(k), fine, &mut evals);
                let vc = self.nest(b, &mut Vec::with_capacity(k), coarse, &mut evals);
                let err = (vf - vc).abs() + self.opts.rel_tol * vf.abs();
                MomentEstimate {
                    value: vf,
                    abs_error: err.max(f64::MIN_POSITIVE),
                    method,
                    n_evals: evals,
                }
            }
            Method::ImportanceMc => self.monte_carlo(b)?,
        };
        Ok(est)
    }

    /// Nested 1-D quadrature over `y_i, y_{i+1}, …` with `ys` fixed.
    fn nest(&self, b: &Block, ys: &mut Vec<f64>, q: QuadOpts, evals: &mut u64) -> f64 {
        let i = ys.len();
        if i == b.factors.len() {
            return 1.0;
        }
        let fac = &b.factors[i];
        let (lo, hi) = self.bounds(&fac.f);
        let mut br = self.breaks_1d(&fac.f);
        let r = self.params.r;
        for &y in ys.iter() {
            br.push(y);
            if b.pair == PairLaw::Rho {
                br.extend([y - r, y + r, y - 2.0 * r, y + 2.0 * r]);
            }
        }
        integrate(
            |y: f64| {
                *evals += 1;
                let mut w = self.factor(fac, &[y]);
                if w == 0.0 {
                    return 0.0;
                }
                for (j, &yj) in ys.iter().enumerate() {
                    let r = (y - yj).abs();
                    if r == 0.0 {
                        return 0.0;
                    }
                    w *= self.pair(b.pair, b.coupling[i][j], r);
                }
                ys.push(y);
                let inner = self.nest(b, ys, q, evals);
                ys.pop();
                w * inner
            },
            lo[0],
            hi[0],
            &br,
            q,
        )
        .value
    }

    fn proposals(&self, b: &Block, i: usize, ys: &[Vec<f64>]) -> Vec<(f64, Proposal)> {
        let d = self.d() as f64;
        let fac = &b.factors[i];
        let (lo, hi) = self.bounds(&fac.f);
        let mut groups: Vec<Vec<Proposal>> = Vec::new();
        if lo.iter().chain(&hi).all(|v| v.is_finite()) {
            groups.push(vec![Proposal::Uniform { lo, hi }]);
        }
        if let Integrand::UnitIncrement { direction, .. } = &fac.f {
            // tail matched to the |u|^{p(α-d-1)} decay
            let nu = fac.power as f64 * (d + 1.0 - self.params.alpha) - d;
            let center = direction.iter().map(|v| v / 2.0).collect();
            groups.push(vec![Proposal::Pareto { center, nu }]);
        }
        let s = match fac.f {
            Integrand::BoxIndicator { .. } => 0.0,
            _ => fac.power as f64 * (d - self.params.alpha),
        };
        let scales = self.scales(b);
        let centers = self.centers(&fac.f);
        if s > 0.0 && !centers.is_empty() {
            let beta = s.min(0.9 * d);
            let mut g = Vec::new();
            for center in centers {
                for &radius in &scales {
                    g.push(Proposal::Power { center: center.clone(), beta, radius });
                }
            }
            groups.push(g);
        }
        let w = omega_d(self.d());
        let mut prev = Vec::new();
        for (j, y) in ys.iter().enumerate() {
            if b.coupling[i][j] > 0.0 {
                let beta = (b.coupling[i][j] * w).min(0.9 * d);
                for &radius in &scales {
                    prev.push(Proposal::Power { center: y.clone(), beta, radius });
                }
            }
        }
        if !prev.is_empty() {
            groups.push(prev);
        }
        let gw = 1.0 / groups.len() as f64;
        groups
            .into_iter()
            .flat_map(|g| {
                let n = g.len() as f64;
                g.into_iter().map(move |p| (gw / n, p))
            })
            .collect()
    }

    /// One importance weight. With `centered`, the pair product `P` is
    /// replaced by `P - 1`: the factor product alone is a control variate
    /// of known mean zero whenever some factor is a first-power increment.
    ///
    /// With `inner`, the last variable is integrated by quadrature given the
    /// sampled ones (d = 1), which removes most of the cancellation noise of
    /// signed integrands; `evals` counts integrand calls.
    fn sample_weight(
        &self,
        b: &Block,
        rng: &mut ChaCha8Rng,
        centered: bool,
        inner: Option<QuadOpts>,
        evals: &mut u64,
    ) -> f64 {
        let k = b.factors.len();
        let d = self.d();
        let sampled = if inner.is_some() { k - 1 } else { k };
        let mut ys: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut weight = 1.0;
        let mut log_p = 0.0;
        for i in 0..sampled {
            let props = self.proposals(b, i, &ys);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = props.len() - 1;
            for (c, (w, _)) in props.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = c;
                    break;
                }
            }
            let y = props[pick].1.sample(d, rng);
            let dens: f64 = props.iter().map(|(w, p)| w * p.density(&y)).sum();
            if !(dens > 0.0) || !dens.is_finite() {
                return 0.0;
            }
            let g = self.factor(&b.factors[i], &y);
            if g == 0.0 {
                return 0.0;
            }
            for (j, yj) in ys.iter().enumerate() {
                let r = dist(&y, yj);
                if r == 0.0 {
                    return 0.0;
                }
                log_p += self.log_pair(b.pair, b.coupling[i][j], r);
            }
            weight *= g / dens;
            ys.push(y);
        }
        *evals += sampled as u64;
        if let Some(q) = inner {
            let mut flat: Vec<f64> = ys.iter().map(|y| y[0]).collect();
            weight *= log_p.exp() * self.nest(b, &mut flat, q, evals);
        } else {
            weight *= if centered { log_p.exp_m1() } else { log_p.exp() };
        }
        if weight.is_finite() {
            weight
        } else {
            0.0
        }
    }

    fn monte_carlo(&self, b: &Block) -> Result<MomentEstimate> {
        let nb = self.opts.mc_samples.div_ceil(MC_BATCH).max(2);
        let seed = self.opts.seed;
        let centered = b.factors.iter().any(|f| {
            f.power == 1 && matches!(f.f, Integrand::Increment { .. } | Integrand::UnitIncrement { .. })
        });
        let k = b.factors.len();
        // conditional quadrature of the last variable costs ~10³ calls per
        // sample, so the sample count shrinks accordingly
        let (inner, batch, nb) = if self.d() == 1 && k >= 3 {
            let n = (self.opts.mc_samples / 64).max(2 * HYBRID_BATCH);
            (Some(QuadOpts::rel(1e-6).with_level(7)), HYBRID_BATCH, n.div_ceil(HYBRID_BATCH))
        } else {
            (None, MC_BATCH, nb)
        };
        let parts = run_indexed(nb, self.opts.workers, |bi| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(bi as u64);
            let (mut s, mut s2, mut ev) = (0.0, 0.0, 0u64);
            for _ in 0..batch {
                let w = self.sample_weight(b, &mut rng, centered, inner, &mut ev);
                s += w;
                s2 += w * w;
            }
            Ok((s, s2, ev))
        })?;
        let n = (nb * batch) as f64;
        let (s, s2) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        let se = (var / (n - 1.0)).sqrt();
        let half = nb / 2;
        let mean_half = parts[..half].iter().map(|p| p.0).sum::<f64>() / (half * batch) as f64;
        Ok(MomentEstimate {
            value: mean,
            abs_error: ((mean - mean_half).abs() + se).max(f64::MIN_POSITIVE),
            method: Method::ImportanceMc,
            n_evals: parts.iter().map(|p| p.2).sum(),
        })
    }

}

fn big_to_f64(b: &BigUint) -> f64 {
    b.to_string().parse().unwrap_or(f64::INFINITY)
}

fn check_accuracy(est: MomentEstimate, opts: &EvalOptions) -> Result<MomentEstimate> {
    if let Some(r) = opts.max_rel_error {
        if est.abs_error > r * est.value.abs() {
            return Err(Error::TargetAccuracyUnreached(format!(
                "abs error {:.3e} exceeds {r} of |{:.6e}|",
                est.abs_error, est.value
            )));
        }
    }
    Ok(est)
}

/// `E[(∫f dQ^γ)^k]`, or the two-parameter cross moment when `spec.cross` is
/// set.
pub fn chaos_moment(suite: &KernelSuite, spec: &MomentSpec, opts: &EvalOptions) -> Result<MomentEstimate> {
    let d = suite.params.d;
    let f = spec.test_function.clone().ok_or_else(|| Error::Config("chaos moment needs a test function".into()))?;
    f.validate(d)?;
    let g1 = *spec.gammas.first().ok_or_else(|| Error::Config("chaos moment needs γ".into()))?;
    let (g, l, g2) = match &spec.cross {
        Some(c) => {
            c.test_function.validate(d)?;
            let g2 = *spec.gammas.get(1).ok_or_else(|| Error::Config("cross moment needs two γ".into()))?;
            (Some(c.test_function.clone()), c.order, g2)
        }
        None => (None, 0, 0.0),
    };
    let w = omega_d(d);
    let gmax = g1.max(g2);
    let total = spec.order + l;
    if !(gmax * gmax * w < d as f64) {
        return Err(Error::IntegrabilityGateViolated("ω_dγ₁² < d".into()));
    }
    if total >= 2 && !((total as f64) * gmax * gmax * w < 2.0 * d as f64) {
        return Err(Error::IntegrabilityGateViolated(format!("kγ²ω_d < 2d fails for k = {total}")));
    }
    let mut groups = vec![(f, 1, spec.order)];
    if let Some(g) = g {
        groups.push((g, 1, l));
    }
    let gam = [g1, g2];
    let block = Block::grouped(&groups, &|a, b| gam[a] * gam[b], PairLaw::Rho);
    let engine = Engine::new(suite, spec.mollified, PairLaw::Rho, *opts)?;
    check_accuracy(engine.eval_block(&block)?, opts)
}

/// `C = γ₀* C₀ e^{-γ₁²C₁/2}/R^{d/2}`; zero without asymmetry.
fn x_const(suite: &KernelSuite) -> Result<f64> {
    if suite.params.gamma0_star == 0.0 {
        return Ok(0.0);
    }
    Ok(suite.constants.as_ref().ok_or(Error::TableNotBuilt("constants"))?.cconst)
}

/// Gates of the even X-family moments of half-order `l`.
pub fn x_even_gate(params: &FieldParams, l: usize) -> Result<()> {
    params.check_x_family().map_err(|e| Error::IntegrabilityGateViolated(e.to_string()))?;
    let lam = params.lambda1();
    let room = params.alpha - params.d as f64 / 2.0;
    if l % 2 == 0 {
        if !(l as f64 * lam < room) {
            return Err(Error::IntegrabilityGateViolated("lγ₁²ω_d<α−d/2".into()));
        }
    } else if !((l + 1) as f64 * lam < room) {
        return Err(Error::IntegrabilityGateViolated("(l+1)γ₁²ω_d<α−d/2".into()));
    }
    Ok(())
}

fn x_block(lag: &[f64], j: usize, singles: usize, squares: usize, g2: f64) -> Block {
    let f = Integrand::Increment { component: j, lag: lag.to_vec() };
    let groups = [(f.clone(), 1, singles), (f, 2, squares)];
    let mult = [[1.0, 2.0], [2.0, 4.0]];
    Block::grouped(&groups, &|a, b| g2 * mult[a][b], PairLaw::Rho)
}

/// `E[(X^j(x+h) - X^j(x))^{2l}]` as the Wick-weighted sum of mixed blocks.
pub fn x_moment_even(suite: &KernelSuite, spec: &MomentSpec, opts: &EvalOptions) -> Result<MomentEstimate> {
    let p = suite.params;
    let l = spec.order;
    if l == 0 {
        return Ok(MomentEstimate::exact(1.0));
    }
    x_even_gate(&p, l)?;
    let h = spec.lag_vec(p.d)?;
    let c = x_const(suite)?;
    let engine = Engine::new(suite, spec.mollified, PairLaw::Rho, *opts)?;
    let wick = WickCoefficients::new(l);
    let g2 = p.gamma1 * p.gamma1;
    let mut total: Option<MomentEstimate> = None;
    for k in 0..=l {
        if k > 0 && c == 0.0 {
            break;
        }
        let coef = big_to_f64(wick.even(k, l)?) * c.powi(2 * k as i32);
        let term = engine.eval_block(&x_block(h, spec.component, 2 * k, l - k, g2))?.scaled(coef);
        total = Some(match total {
            Some(t) => t.plus(term),
            None => term,
        });
    }
    check_accuracy(total.expect("k = 0 term"), opts)
}

/// Leading small-lag term of an odd X-family moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddSurrogate {
    /// `Σ_l^j(e) = γ₀* C(l,γ₁) I_l^j(e) e^j`
    pub sigma: f64,
    pub c_l: f64,
    pub i_l: MomentEstimate,
    /// `∫₀^∞ r^{α-1}φ(r)e^{2lγ₁²ρ(r)}ρ'(r)dr`
    pub dissipation: f64,
    pub zeta: f64,
    /// `Σ (λ/R)^{ζ̃}`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddMoment {
    /// Full Wick sum at the requested lag.
    pub moment: MomentEstimate,
    /// Absent when the surrogate's gate fails; the reason is in
    /// `surrogate_gate`.
    pub surrogate: Option<OddSurrogate>,
    pub surrogate_gate: Option<String>,
}

/// `φ(0) = lim (ρ(x) - ω_d ln(1/|x|))`, read from the table's log tail.
fn phi_zero(suite: &KernelSuite) -> Result<f64> {
    let r = 1e-12;
    Ok(suite.rho_radial(r)? - omega_d(suite.params.d) * (1.0 / r).ln())
}

/// `E[(X^j(x+h) - X^j(x))^{2l+1}]` and its small-lag surrogate.
pub fn x_moment_odd(suite: &KernelSuite, spec: &MomentSpec, opts: &EvalOptions) -> Result<OddMoment> {
    let p = suite.params;
    let l = spec.order;
    x_even_gate(&p, l.max(1))?;
    let h = spec.lag_vec(p.d)?;
    let c = x_const(suite)?;
    if c == 0.0 {
        let zero = MomentEstimate::exact(0.0);
        let zeta = scaling_exponent(ExponentFamily::XFamily, 2 * l + 1, &p).ok();
        let surrogate = zeta.map(|zeta| OddSurrogate { sigma: 0.0, c_l: 0.0, i_l: zero, dissipation: 0.0, zeta, value: 0.0 });
        return Ok(OddMoment { moment: zero, surrogate, surrogate_gate: None });
    }
    let engine = Engine::new(suite, spec.mollified, PairLaw::Rho, *opts)?;
    let wick = WickCoefficients::new(l.max(1));
    let g2 = p.gamma1 * p.gamma1;
    let mut total: Option<MomentEstimate> = None;
    for k in 0..=l {
        let coef = big_to_f64(wick.odd(k, l)?) * c.powi(2 * k as i32 + 1);
        let term = engine.eval_block(&x_block(h, spec.component, 2 * k + 1, l - k, g2))?.scaled(coef);
        total = Some(match total {
            Some(t) => t.plus(term),
            None => term,
        });
    }
    let moment = check_accuracy(total.expect("k = 0 term"), opts)?;

    let (surrogate, surrogate_gate) = match odd_surrogate(suite, l, h, spec.component, opts) {
        Ok(s) => (Some(s), None),
        Err(Error::IntegrabilityGateViolated(m)) | Err(Error::QuadratureNearSingularity(m)) => (None, Some(m)),
        Err(e) => return Err(e),
    };
    Ok(OddMoment { moment, surrogate, surrogate_gate })
}

fn odd_surrogate(suite: &KernelSuite, l: usize, h: &[f64], j: usize, opts: &EvalOptions) -> Result<OddSurrogate> {
    let p = suite.params;
    let lam = norm(h);
    if lam == 0.0 {
        return Err(Error::Config("odd surrogate needs a nonzero lag".into()));
    }
    let dissipation = radial_dissipation_integral(l, suite)?;
    let consts = suite.constants.as_ref().ok_or(Error::TableNotBuilt("constants"))?;
    let e: Vec<f64> = h.iter().map(|v| v / lam).collect();
    let g2 = p.gamma1 * p.gamma1;
    let w = omega_d(p.d);
    let alpha0 = big_to_f64(&WickCoefficients::new(l.max(1)).odd(0, l)?.clone());
    let c_l = alpha0
        * consts.c0
        * (-0.5 * g2 * consts.c1).exp()
        * (2.0 * (l * (l.saturating_sub(1))) as f64 * g2 * phi_zero(suite)?).exp()
        * (-2.0 * l as f64 * g2 * w / p.d as f64 * dissipation);
    let f = Integrand::UnitIncrement { component: j, direction: e.clone() };
    let block = Block::grouped(&[(f, 2, l)], &|_, _| 4.0 * g2, PairLaw::Pure);
    let engine = Engine::new(suite, false, PairLaw::Pure, *opts)?;
    let i_l = engine.eval_block(&block)?;
    let sigma = p.gamma0_star * c_l * i_l.value * e[j];
    let zeta = scaling_exponent(ExponentFamily::XFamily, 2 * l + 1, &p)?;
    Ok(OddSurrogate { sigma, c_l, i_l, dissipation, zeta, value: sigma * (lam / p.r).powf(zeta) })
}

/// `∫₀^∞ r^{α-1}φ(r) e^{2lγ₁²ρ(r)} ρ'(r) dr`; the integrand vanishes for
/// `r >= 2`.
pub fn radial_dissipation_integral(l: usize, suite: &KernelSuite) -> Result<f64> {
    let p = suite.params;
    let c = 2.0 * l as f64 * p.gamma1 * p.gamma1;
    let margin = p.alpha - 1.0 - c * p.omega_d();
    if !(margin > 0.0) {
        return Err(Error::IntegrabilityGateViolated("1+2lγ₁²ω_d<α".into()));
    }
    if margin < 0.02 {
        return Err(Error::QuadratureNearSingularity(format!(
            "α - 1 - 2lγ₁²ω_d = {margin:.3e} leaves a near-critical r^{{-1}} singularity"
        )));
    }
    let tab = suite.rho_table()?;
    let q = integrate(
        |r: f64| r.powf(p.alpha - 1.0) * cutoff(r) * (c * tab.eval(r)).exp() * tab.deriv(r),
        0.0,
        2.0,
        &[1.0],
        QuadOpts::rel(1e-10),
    );
    Ok(q.value)
}

/// Increment moment of the X₀ family and its small-lag coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct X0Moment {
    pub moment: MomentEstimate,
    /// `C_q^j(e)`
    pub c_q: MomentEstimate,
    pub zeta: f64,
    /// `C_q (λ/R)^{ζ_q}`
    pub surrogate: f64,
}

/// Gates of the X₀ moments of order `q`.
pub fn x0_gate(params: &FieldParams, q: usize) -> Result<()> {
    params.basic_validity().map_err(|e| Error::IntegrabilityGateViolated(e.to_string()))?;
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::IntegrabilityGateViolated(format!("0 < α < 1 fails: α = {}", params.alpha)));
    }
    let l = q.div_ceil(2).max(1);
    let lam = params.lambda0();
    if l == 1 {
        if !(lam < params.alpha) {
            return Err(Error::IntegrabilityGateViolated("γ₀²ω_d<α".into()));
        }
    } else if !((2.0 * l as f64 - 1.5) * lam < params.alpha.min(params.d as f64 / 2.0)) {
        return Err(Error::IntegrabilityGateViolated("(2l−3/2)γ₀²ω_d<α∧d/2".into()));
    }
    Ok(())
}

/// `E[(X₀^j(x+λe) - X₀^j(x))^q]` and `C_q^j(e)`.
pub fn x0_moment(suite: &KernelSuite, spec: &MomentSpec, opts: &EvalOptions) -> Result<X0Moment> {
    let p = suite.params;
    let q = spec.order;
    x0_gate(&p, q)?;
    let h = spec.lag_vec(p.d)?;
    let lam = norm(h);
    if lam == 0.0 {
        return Err(Error::Config("X₀ moment needs a nonzero lag".into()));
    }
    let g2 = p.gamma0 * p.gamma0;
    let engine = Engine::new(suite, spec.mollified, PairLaw::Rho, *opts)?;
    let f = Integrand::Increment { component: spec.component, lag: h.to_vec() };
    let moment = engine.eval_block(&Block::grouped(&[(f, 1, q)], &|_, _| g2, PairLaw::Rho))?;

    let e: Vec<f64> = h.iter().map(|v| v / lam).collect();
    let u = Integrand::UnitIncrement { component: spec.component, direction: e };
    let pure = Engine::new(suite, false, PairLaw::Pure, *opts)?;
    let raw = pure.eval_block(&Block::grouped(&[(u, 1, q)], &|_, _| g2, PairLaw::Pure))?;
    let pref = p.r.powf(q as f64 * p.d as f64 / 2.0)
        * if q >= 2 && g2 > 0.0 { (0.5 * (q * (q - 1)) as f64 * g2 * phi_zero(suite)?).exp() } else { 1.0 };
    let c_q = raw.scaled(pref);
    let zeta = scaling_exponent(ExponentFamily::X0Family, q, &p)?;
    Ok(X0Moment { moment: check_accuracy(moment, opts)?, c_q, zeta, surrogate: c_q.value * (lam / p.r).powf(zeta) })
}

/// Families with a closed-form scaling exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentFamily {
    /// Monofractal Gaussian base field.
    GaussianBase,
    /// Even orders `2l` and odd orders `2l+1` (l >= 1).
    XFamily,
    X0Family,
}

/// Closed-form structure-function exponent of order `q`.
pub fn scaling_exponent(family: ExponentFamily, q: usize, params: &FieldParams) -> Result<f64> {
    let (a, d) = (params.alpha, params.d as f64);
    let qf = q as f64;
    match family {
        _ if q == 0 => Err(Error::FamilyOrderMismatch("order 0 has no scaling exponent".into())),
        ExponentFamily::GaussianBase => Ok(qf * (a - d / 2.0)),
        ExponentFamily::XFamily => {
            if q == 1 {
                return Err(Error::FamilyOrderMismatch("the X family has no first-order exponent".into()));
            }
            let l = (q / 2) as f64;
            let even = l * (2.0 * a - d) - 2.0 * params.lambda1() * l * (l - 1.0);
            Ok(if q % 2 == 0 { even } else { even + 1.0 })
        }
        ExponentFamily::X0Family => Ok(qf * a - 0.5 * qf * (qf - 1.0) * params.lambda0()),
    }
}

/// Regularity exponent `α` for which `ζ₃ = 1` at intermittency
/// `μ = 4πγ₀²` in d = 3; returns `(α, ζ₃)`.
pub fn four_fifths_calibration(mu: f64) -> (f64, f64) {
    let alpha = 1.0 / 3.0 + mu;
    let params = FieldParams {
        d: 3,
        alpha,
        gamma0: (mu / (4.0 * std::f64::consts::PI)).sqrt(),
        ..Default::default()
    };
    let zeta3 = scaling_exponent(ExponentFamily::X0Family, 3, &params).expect("q = 3 is valid");
    (alpha, zeta3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    FirstPower,
    Squared,
}

/// Fitted slope of `sup_x ∫|f_h|^p/|(x-y)/R|_*^δ dy` against `|h|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundExponent {
    pub slope: f64,
    /// `(α-δ)∧1` or `2α-d-δ`.
    pub target: f64,
    /// `(h, sup integral)` rungs.
    pub ladder: Vec<(f64, f64)>,
}

/// Lag rungs `h/R = 2^{-k}` of the bound fit.
pub const BOUND_LADDER: std::ops::RangeInclusive<i32> = 14..=24;

/// The 17 probe points of the supremum, for lag `h`.
pub fn sup_probes(h: f64, r: f64) -> Vec<f64> {
    let mut v = vec![0.0];
    for a in [h / 2.0, h, 2.0 * h, 4.0 * h, r / 8.0, r / 4.0, r / 2.0, r] {
        v.push(a);
        v.push(-a);
    }
    v
}

fn bound_gate(delta: f64, params: &FieldParams, mode: BoundMode) -> Result<f64> {
    let a = params.alpha;
    let d = params.d as f64;
    match mode {
        BoundMode::FirstPower => {
            if !(delta >= 0.0 && delta < a) || (delta - (a - 1.0)).abs() < 1e-12 {
                return Err(Error::GateViolated("0 ≤ δ < α, δ ≠ α−1".into()));
            }
            Ok((a - delta).min(1.0))
        }
        BoundMode::Squared => {
            if !(delta >= 0.0 && delta < 2.0 * a - d) {
                return Err(Error::GateViolated("0 ≤ δ < 2α−d".into()));
            }
            Ok(2.0 * a - d - delta)
        }
    }
}

/// `sup_x ∫ |F_R(y) - F_R(y-h)|^p / |(x-y)/R|_*^δ dy` over the probe set
/// (d = 1).
pub fn increment_kernel_sup(h: f64, delta: f64, params: &FieldParams, mode: BoundMode) -> Result<f64> {
    if params.d != 1 {
        return Err(Error::DimensionUnsupported(params.d));
    }
    bound_gate(delta, params, mode)?;
    if h == 0.0 {
        return Ok(0.0);
    }
    let suite = KernelSuite::new(*params, Mollifier::default());
    let r = params.r;
    let p = if mode == BoundMode::FirstPower { 1 } else { 2 };
    let f = |y: f64| (suite.eval_fr(&[y], 0) - suite.eval_fr(&[y - h], 0)).abs().powi(p);
    let (lo, hi) = (h.min(0.0) - 2.0 * r, h.max(0.0) + 2.0 * r);
    let mut best: f64 = 0.0;
    for x in sup_probes(h, r) {
        let br = [0.0, h, x, x - r, x + r, -r, r, h - r, h + r];
        let q = integrate(
            |y: f64| {
                let s = ((x - y).abs() / r).min(1.0);
                if s == 0.0 {
                    return 0.0;
                }
                f(y) * s.powf(-delta)
            },
            lo,
            hi,
            &br,
            QuadOpts::rel(1e-9),
        );
        best = best.max(q.value);
    }
    Ok(best)
}

/// Log-log slope of the sup integral over the lag ladder.
pub fn increment_kernel_bound_exponent(delta: f64, params: &FieldParams, mode: BoundMode) -> Result<BoundExponent> {
    let target = bound_gate(delta, params, mode)?;
    let ladder: Vec<(f64, f64)> = BOUND_LADDER
        .map(|k| {
            let h = params.r * 2f64.powi(-k);
            increment_kernel_sup(h, delta, params, mode).map(|s| (h, s))
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = ladder.iter().map(|(h, s)| (h.ln(), s.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(BoundExponent { slope: sxy / sxx, target, ladder })
}

/// One row of an exported moment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub spec: MomentSpec,
    pub estimate: MomentEstimate,
}

/// CSV with the spec descriptor columns followed by value and error.
pub fn moment_table_csv(rows: &[MomentRow]) -> String {
    let mut out = String::from("family,order,component,lag,test_function,gammas,mollified,value,abs_error,method,n_evals\n");
    for r in rows {
        let s = &r.spec;
        let fam = serde_json::to_string(&s.family).unwrap_or_default();
        let lag = s.lag.as_ref().map(|v| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")).unwrap_or_default();
        let tf = s.test_function.as_ref().map(|t| serde_json::to_string(t).unwrap_or_default()).unwrap_or_default();
        let gam = s.gammas.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        let method = serde_json::to_string(&r.estimate.method).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},\"{}\",{},{},{:.12e},{:.6e},{},{}\n",
            fam.trim_matches('"'),
            s.order,
            s.component,
            lag,
            tf.replace('"', "'"),
            gam,
            s.mollified,
            r.estimate.value,
            r.estimate.abs_error,
            method.trim_matches('"'),
            r.estimate.n_evals
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_identities() {
        let p = FieldParams { d: 3, alpha: 1.7, gamma1: 0.05, ..Default::default() };
        for l in 1..5 {
            let even = scaling_exponent(ExponentFamily::XFamily, 2 * l, &p).unwrap();
            let odd = scaling_exponent(ExponentFamily::XFamily, 2 * l + 1, &p).unwrap();
            assert_eq!(odd, even + 1.0);
        }
        assert!(matches!(scaling_exponent(ExponentFamily::XFamily, 1, &p), Err(Error::FamilyOrderMismatch(_))));
        assert!(matches!(scaling_exponent(ExponentFamily::X0Family, 0, &p), Err(Error::FamilyOrderMismatch(_))));
    }

    #[test]
    fn probe_set_has_17_points() {
        assert_eq!(sup_probes(0.01, 1.0).len(), 17);
    }

    #[test]
    fn proposal_densities_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..=3 {
            let p = Proposal::Power { center: vec![0.2; d], beta: 0.7, radius: 1.5 };
            // E_p[1/p] over the ball equals its volume
            let n = 200_000;
            let mut s = 0.0;
            for _ in 0..n {
                let y = p.sample(d, &mut rng);
                s += 1.0 / p.density(&y);
            }
            let vol = omega_d(d) / d as f64 * 1.5f64.powi(d as i32);
            assert!((s / n as f64 - vol).abs() < 0.02 * vol, "d={d}: {} vs {vol}", s / n as f64);
        }
    }
}
