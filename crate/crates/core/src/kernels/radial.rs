//! Convolutions of radial functions and log-spaced radial tables.

use crate::quad::{integrate, integrate_pt, Pt, Quad, QuadOpts};
use std::f64::consts::PI;

/// A radial profile `r -> f(r)` with its support radius and the radii where
/// it is non-smooth. `antideriv`, when known in closed form, is
/// `t -> ∫_0^t τ f(τ) dτ` and speeds up the three-dimensional formula.
pub struct Radial<'a> {
    pub f: &'a (dyn Fn(f64) -> f64 + Sync),
    pub support: f64,
    pub breaks: Vec<f64>,
    pub antideriv: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
}

impl<'a> Radial<'a> {
    pub fn new(f: &'a (dyn Fn(f64) -> f64 + Sync), support: f64, breaks: Vec<f64>) -> Self {
        Radial { f, support, breaks, antideriv: None }
    }

    pub fn with_antideriv(mut self, g: &'a (dyn Fn(f64) -> f64 + Sync)) -> Self {
        self.antideriv = Some(g);
        self
    }

    fn eval(&self, r: f64) -> f64 {
        if r >= self.support {
            0.0
        } else {
            (self.f)(r)
        }
    }
}

/// `(f * g)(x)` at `|x| = r` in dimension `d`, for radial `f` and `g`.
/// `f` should be the profile with the smaller support.
pub fn radial_conv(d: usize, f: &Radial, g: &Radial, r: f64, opts: QuadOpts) -> Quad {
    match d {
        1 => conv_1d(f, g, r, opts),
        2 => conv_2d(f, g, r, opts),
        3 => conv_3d(f, g, r, opts),
        _ => panic!("radial convolution implemented for d <= 3"),
    }
}

fn conv_1d(f: &Radial, g: &Radial, x: f64, opts: QuadOpts) -> Quad {
    let sf = f.support;
    let mut br = vec![0.0, x];
    for &b in &f.breaks {
        br.push(b);
        br.push(-b);
    }
    for &b in g.breaks.iter().chain(std::iter::once(&g.support)) {
        br.push(x - b);
        br.push(x + b);
    }
    let lo = (-sf).max(x - g.support);
    let hi = sf.min(x + g.support);
    if hi <= lo {
        return Quad::ZERO;
    }
    integrate_pt(|p: Pt| f.eval(p.offset(0.0).abs()) * g.eval(p.offset(x).abs()), lo, hi, &br, opts)
}

fn conv_3d(f: &Radial, g: &Radial, r: f64, opts: QuadOpts) -> Quad {
    let sf = f.support;
    let mut sbreaks: Vec<f64> = f.breaks.clone();
    if r < 1e-9 {
        let q = integrate(|s: f64| s * s * f.eval(s) * g.eval(s), 0.0, sf.min(g.support), &sbreaks, opts);
        return Quad { value: 4.0 * PI * q.value, error: 4.0 * PI * q.error, ..q };
    }
    sbreaks.push(r);
    for &b in g.breaks.iter().chain(std::iter::once(&g.support)) {
        sbreaks.push(b - r);
        sbreaks.push(r - b);
        sbreaks.push(r + b);
    }
    let mut gbreaks = g.breaks.clone();
    gbreaks.push(g.support);
    let inner = QuadOpts { rel_tol: (opts.rel_tol * 0.1).max(1e-14), ..opts };
    let big_g = |t: f64| -> f64 {
        if let Some(a) = g.antideriv {
            a(t)
        } else {
            integrate(|tau: f64| tau * g.eval(tau), 0.0, t.min(g.support), &gbreaks, inner).value
        }
    };
    let q = integrate(
        |s: f64| s * f.eval(s) * (big_g(r + s) - big_g((r - s).abs())),
        0.0,
        sf,
        &sbreaks,
        opts,
    );
    let c = 2.0 * PI / r;
    Quad { value: c * q.value, error: c * q.error, ..q }
}

fn conv_2d(f: &Radial, g: &Radial, r: f64, opts: QuadOpts) -> Quad {
    let sf = f.support;
    if r < 1e-9 {
        let q = integrate(|s: f64| s * f.eval(s) * g.eval(s), 0.0, sf.min(g.support), &f.breaks, opts);
        return Quad { value: 2.0 * PI * q.value, error: 2.0 * PI * q.error, ..q };
    }
    let mut sbreaks: Vec<f64> = f.breaks.clone();
    sbreaks.push(r);
    let gb: Vec<f64> = g.breaks.iter().copied().chain(std::iter::once(g.support)).collect();
    for &b in &gb {
        sbreaks.push(b - r);
        sbreaks.push(r - b);
        sbreaks.push(r + b);
    }
    let inner = QuadOpts { rel_tol: (opts.rel_tol * 0.1).max(1e-14), ..opts };
    let q = integrate_pt(
        |p: Pt| {
            let s = p.x;
            let rs = -p.offset(r);
            let fs = f.eval(s);
            if fs == 0.0 {
                return 0.0;
            }
            // angles where the distance crosses a break of g, in the same
            // form as the distance below so both round consistently
            let mut tb = Vec::new();
            for &b in &gb {
                let a = (b - rs.abs()) * (b + rs.abs()) / (4.0 * r * s);
                if a > 0.0 && a < 1.0 {
                    tb.push(2.0 * a.sqrt().asin());
                }
            }
            let ang = integrate(
                |th: f64| {
                    // distance computed in a cancellation-free form
                    let half = (0.5 * th).sin();
                    let dist = (rs * rs + 4.0 * r * s * half * half).sqrt();
                    g.eval(dist)
                },
                0.0,
                PI,
                &tb,
                inner,
            );
            2.0 * s * fs * ang.value
        },
        0.0,
        sf,
        &sbreaks,
        opts,
    );
    q
}

/// Radially symmetric function tabulated on log-spaced radii and
/// interpolated by monotone piecewise cubics in `ln r`.
#[derive(Debug, Clone)]
pub struct RadialTable {
    ln_r: Vec<f64>,
    v: Vec<f64>,
    m: Vec<f64>,
    support: f64,
    below: Below,
}

/// Behaviour for radii below the first node.
#[derive(Debug, Clone, Copy)]
pub enum Below {
    /// Continue with the value at the first node.
    Flat,
    /// Continue as `coef * ln(1/r) + (v0 - coef * ln(1/r0))`.
    Log(f64),
}

impl RadialTable {
    /// `n` log-spaced radii from `r_min` to `support`, plus any extra nodes.
    pub fn nodes(n: usize, r_min: f64, support: f64, extra: &[f64]) -> Vec<f64> {
        let (a, b) = (r_min.ln(), support.ln());
        let mut r: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
        r.extend(extra.iter().copied().filter(|&x| x > r_min && x < support));
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        r.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
        r
    }

    pub fn from_values(r: &[f64], v: Vec<f64>, support: f64, below: Below) -> Self {
        assert_eq!(r.len(), v.len());
        let ln_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
        let m = pchip_slopes(&ln_r, &v);
        RadialTable { ln_r, v, m, support, below }
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.ln_r.iter().map(|x| x.exp())
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.support {
            return 0.0;
        }
        let lr = r.max(1e-300).ln();
        let n = self.ln_r.len();
        if lr <= self.ln_r[0] {
            return match self.below {
                Below::Flat => self.v[0],
                Below::Log(c) => self.v[0] + c * (self.ln_r[0] - lr),
            };
        }
        if lr >= self.ln_r[n - 1] {
            return self.v[n - 1];
        }
        let i = match self.ln_r.binary_search_by(|p| p.partial_cmp(&lr).unwrap()) {
            Ok(i) => return self.v[i],
            Err(i) => i - 1,
        };
        hermite(&self.ln_r, &self.v, &self.m, i, lr).0
    }

    /// Radial derivative `d/dr`.
    pub fn deriv(&self, r: f64) -> f64 {
        if r >= self.support {
            return 0.0;
        }
        let lr = r.max(1e-300).ln();
        let n = self.ln_r.len();
        if lr <= self.ln_r[0] {
            return match self.below {
                Below::Flat => 0.0,
                Below::Log(c) => -c / r,
            };
        }
        if lr >= self.ln_r[n - 1] {
            return 0.0;
        }
        let i = match self.ln_r.binary_search_by(|p| p.partial_cmp(&lr).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        hermite(&self.ln_r, &self.v, &self.m, i, lr).1 / r
    }
}

fn hermite(x: &[f64], y: &[f64], m: &[f64], i: usize, t: f64) -> (f64, f64) {
    let h = x[i + 1] - x[i];
    let s = (t - x[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let v = h00 * y[i] + h10 * h * m[i] + h01 * y[i + 1] + h11 * h * m[i + 1];
    let dv = ((6.0 * s2 - 6.0 * s) * y[i]
        + (3.0 * s2 - 4.0 * s + 1.0) * h * m[i]
        + (-6.0 * s2 + 6.0 * s) * y[i + 1]
        + (3.0 * s2 - 2.0 * s) * h * m[i + 1])
        / h;
    (v, dv)
}

/// Fritsch–Carlson monotone slopes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(_: f64) -> f64 {
        1.0
    }

    #[test]
    fn ball_volumes() {
        // indicator * indicator at r = 0 is the ball volume
        let f = |r: f64| if r <= 1.0 { 1.0 } else { 0.0 };
        let a = Radial::new(&f, 1.0, vec![]);
        let b = Radial::new(&one, 1.0, vec![]);
        let o = QuadOpts::rel(1e-12);
        assert!((radial_conv(1, &a, &b, 0.0, o).value - 2.0).abs() < 1e-10);
        assert!((radial_conv(2, &a, &b, 0.0, o).value - PI).abs() < 1e-10);
        assert!((radial_conv(3, &a, &b, 0.0, o).value - 4.0 * PI / 3.0).abs() < 1e-10);
        // lens area of two unit disks at distance 1
        let lens = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        let q = radial_conv(2, &a, &b, 1.0, QuadOpts::rel(1e-10));
        assert!((q.value - lens).abs() < 1e-7, "{} vs {}", q.value, lens);
        // lens volume of two unit balls at distance 1: 5π/12
        let q = radial_conv(3, &a, &b, 1.0, o);
        assert!((q.value - 5.0 * PI / 12.0).abs() < 1e-9, "{}", q.value);
    }

    #[test]
    fn table_reproduces_log() {
        let r = RadialTable::nodes(128, 1e-6, 1.0, &[]);
        let v: Vec<f64> = r.iter().map(|x| -2.0 * x.ln()).collect();
        let t = RadialTable::from_values(&r, v, 2.0, Below::Log(2.0));
        for &x in &[1e-8, 3e-5, 0.01, 0.5] {
            assert!((t.eval(x) + 2.0 * f64::ln(x)).abs() < 1e-9);
            assert!((t.deriv(x) + 2.0 / x).abs() < 1e-6 / x);
        }
        assert_eq!(t.eval(2.5), 0.0);
    }
}
