//! Double-exponential quadrature.
//!
//! Tanh-sinh on finite intervals and exp-sinh on half lines. Both tolerate
//! integrable algebraic and logarithmic endpoint singularities, so callers
//! split the domain at every interior singular point and let the endpoint
//! clustering do the rest.

use std::f64::consts::FRAC_PI_2;

/// Result of one quadrature call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    /// Difference between the last two refinement levels.
    pub error: f64,
    pub evals: usize,
}

impl Quad {
    pub const ZERO: Quad = Quad { value: 0.0, error: 0.0, evals: 0 };

    fn add(self, o: Quad) -> Quad {
        Quad { value: self.value + o.value, error: self.error + o.error, evals: self.evals + o.evals }
    }
}

/// Tolerances and level cap shared by all rules.
#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_level: u32,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts { rel_tol: 1e-10, abs_tol: 1e-300, max_level: 9 }
    }
}

impl QuadOpts {
    pub fn rel(rel_tol: f64) -> Self {
        QuadOpts { rel_tol, ..Default::default() }
    }

    pub fn with_level(mut self, max_level: u32) -> Self {
        self.max_level = max_level;
        self
    }
}

const TS_TMAX: f64 = 4.0;
const ES_TMIN: f64 = -4.5;
const ES_TMAX: f64 = 6.0;

/// A quadrature node together with its exact offsets from the current
/// segment's endpoints.
#[derive(Debug, Clone, Copy)]
pub struct Pt {
    pub x: f64,
    a: f64,
    b: f64,
    da: f64,
    db: f64,
}

impl Pt {
    /// `x - p`, exact to full relative precision when `p` is an endpoint of
    /// the segment (i.e. a breakpoint passed to [`integrate_pt`]).
    pub fn offset(&self, p: f64) -> f64 {
        if p == self.a {
            self.da
        } else if p == self.b {
            -self.db
        } else {
            self.x - p
        }
    }
}

/// Tanh-sinh rule on [a, b]. Non-finite integrand values (a singularity hit
/// exactly) are dropped.
pub fn tanh_sinh_pt<F: FnMut(Pt) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOpts) -> Quad {
    if a == b {
        return Quad::ZERO;
    }
    if b < a {
        let q = tanh_sinh_pt(f, b, a, opts);
        return Quad { value: -q.value, ..q };
    }
    let half = 0.5 * (b - a);
    let width = b - a;
    let mut evals = 0usize;
    let node = |t: f64, f: &mut F, evals: &mut usize| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        // distance from the nearer endpoint: half * (1 - tanh|u|)
        let dist = half * (2.0 / (1.0 + (2.0 * u.abs()).exp()));
        let w = half * FRAC_PI_2 * t.cosh() / (ch * ch);
        if !(w > 0.0) || dist <= 0.0 {
            return 0.0;
        }
        let p = if u < 0.0 {
            Pt { x: a + dist, a, b, da: dist, db: width - dist }
        } else {
            Pt { x: b - dist, a, b, da: width - dist, db: dist }
        };
        *evals += 1;
        let v = f(p);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };

    let mut h = 0.5f64;
    let mut sum = node(0.0, &mut f, &mut evals);
    let mut k = 1;
    while (k as f64) * h <= TS_TMAX {
        let t = k as f64 * h;
        sum += node(t, &mut f, &mut evals) + node(-t, &mut f, &mut evals);
        k += 1;
    }
    let mut prev = sum * h;
    let mut err = f64::INFINITY;
    for _level in 1..=opts.max_level {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= TS_TMAX {
            let t = k as f64 * h;
            sum += node(t, &mut f, &mut evals) + node(-t, &mut f, &mut evals);
            k += 2;
        }
        let cur = sum * h;
        err = (cur - prev).abs();
        prev = cur;
        if err <= opts.abs_tol.max(opts.rel_tol * cur.abs()) {
            break;
        }
    }
    Quad { value: prev, error: err, evals }
}

/// Exp-sinh rule on [a, ∞). Handles algebraic decay down to |x|^{-1-δ}.
pub fn exp_sinh_pt<F: FnMut(Pt) -> f64>(mut f: F, a: f64, opts: QuadOpts) -> Quad {
    let mut evals = 0usize;
    let node = |t: f64, f: &mut F, evals: &mut usize| -> f64 {
        let dist = (FRAC_PI_2 * t.sinh()).exp();
        let w = FRAC_PI_2 * t.cosh() * dist;
        if !w.is_finite() || dist == 0.0 {
            return 0.0;
        }
        *evals += 1;
        let v = f(Pt { x: a + dist, a, b: f64::INFINITY, da: dist, db: f64::INFINITY });
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let mut h = 0.5f64;
    let mut sum = 0.0;
    let kmin = (ES_TMIN / h).ceil() as i64;
    let kmax = (ES_TMAX / h).floor() as i64;
    for k in kmin..=kmax {
        sum += node(k as f64 * h, &mut f, &mut evals);
    }
    let mut prev = sum * h;
    let mut err = f64::INFINITY;
    for _level in 1..=opts.max_level {
        h *= 0.5;
        let kmin = (ES_TMIN / h).ceil() as i64;
        let kmax = (ES_TMAX / h).floor() as i64;
        for k in kmin..=kmax {
            if k % 2 != 0 {
                sum += node(k as f64 * h, &mut f, &mut evals);
            }
        }
        let cur = sum * h;
        err = (cur - prev).abs();
        prev = cur;
        if err <= opts.abs_tol.max(opts.rel_tol * cur.abs()) {
            break;
        }
    }
    Quad { value: prev, error: err, evals }
}

/// Integral over [lo, hi] split at every breakpoint strictly inside.
/// Either end may be infinite.
pub fn integrate_pt<F: FnMut(Pt) -> f64>(mut f: F, lo: f64, hi: f64, breaks: &[f64], opts: QuadOpts) -> Quad {
    if lo == hi {
        return Quad::ZERO;
    }
    if hi < lo {
        let q = integrate_pt(f, hi, lo, breaks, opts);
        return Quad { value: -q.value, ..q };
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi && b.is_finite()).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut edges = Vec::with_capacity(pts.len() + 3);
    edges.push(lo);
    edges.extend(pts);
    edges.push(hi);
    // infinite ends need a finite anchor
    if lo == f64::NEG_INFINITY && edges.len() == 2 {
        let anchor = if hi.is_finite() { hi - 1.0 } else { 0.0 };
        edges.insert(1, anchor);
    }
    if hi == f64::INFINITY && edges[edges.len() - 2] == f64::NEG_INFINITY {
        edges.insert(edges.len() - 1, 0.0);
    }
    let mut total = Quad::ZERO;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let q = if a == f64::NEG_INFINITY {
            // mirror onto [b, ∞)
            exp_sinh_pt(
                |p: Pt| f(Pt { x: b - p.da, a: f64::NEG_INFINITY, b, da: f64::INFINITY, db: p.da }),
                b,
                opts,
            )
        } else if b == f64::INFINITY {
            exp_sinh_pt(&mut f, a, opts)
        } else {
            tanh_sinh_pt(&mut f, a, b, opts)
        };
        total = total.add(q);
    }
    total
}

/// [`integrate_pt`] for integrands that only need the abscissa.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, breaks: &[f64], opts: QuadOpts) -> Quad {
    integrate_pt(|p: Pt| f(p.x), lo, hi, breaks, opts)
}

/// Tanh-sinh on [a, b] for integrands that only need the abscissa.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOpts) -> Quad {
    tanh_sinh_pt(|p: Pt| f(p.x), a, b, opts)
}

/// Exp-sinh on [a, ∞) for integrands that only need the abscissa.
pub fn exp_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: QuadOpts) -> Quad {
    exp_sinh_pt(|p: Pt| f(p.x), a, opts)
}
