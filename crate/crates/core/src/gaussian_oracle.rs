//! Exact Gaussian moment combinatorics used as oracles for Monte-Carlo
//! estimates: pairing coefficients, `E(g_1…g_m e^g)`, the integration by
//! parts identity and the Kahane-type exponential pair bounds.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Largest half-order tabulated.
pub const MAX_L: usize = 8;
/// Largest number of polynomial factors in a pairing expansion.
pub const MAX_FACTORS: usize = 9;

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::from(1u32), |acc, k| acc * k)
}

fn pow2(n: usize) -> BigUint {
    BigUint::from(1u32) << n
}

/// Exact tables of the pairing counts.
///
/// `alpha_kl[l][k]` counts the terms of the even expansion of
/// `E(g_1…g_{2l} e^g)` in which `2k` factors pair with `g`;
/// `alpha_tilde_kl[l][k]` does the same with `2k+1` of `2l+1` factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WickCoefficients {
    pub alpha_kl: Vec<Vec<BigUint>>,
    pub alpha_tilde_kl: Vec<Vec<BigUint>>,
    pub max_l: usize,
}

impl WickCoefficients {
    pub fn new(max_l: usize) -> Self {
        let mut a = Vec::with_capacity(max_l + 1);
        let mut at = Vec::with_capacity(max_l + 1);
        for l in 0..=max_l {
            let row: Vec<BigUint> = (0..=l)
                .map(|k| factorial(2 * l) / (factorial(2 * k) * pow2(l - k) * factorial(l - k)))
                .collect();
            let row_t: Vec<BigUint> = (0..=l)
                .map(|k| factorial(2 * l + 1) / (factorial(2 * k + 1) * pow2(l - k) * factorial(l - k)))
                .collect();
            a.push(row);
            at.push(row_t);
        }
        WickCoefficients { alpha_kl: a, alpha_tilde_kl: at, max_l }
    }

    pub fn even(&self, k: usize, l: usize) -> Result<&BigUint> {
        if k > l || l > self.max_l {
            return Err(Error::OrderOutOfRange(format!("need 0 <= k <= l <= {}, got k={k}, l={l}", self.max_l)));
        }
        Ok(&self.alpha_kl[l][k])
    }

    pub fn odd(&self, k: usize, l: usize) -> Result<&BigUint> {
        if k > l || l > self.max_l {
            return Err(Error::OrderOutOfRange(format!("need 0 <= k <= l <= {}, got k={k}, l={l}", self.max_l)));
        }
        Ok(&self.alpha_tilde_kl[l][k])
    }
}

/// `α_{k,l} = (2l)!/((2k)! 2^{l-k} (l-k)!)`, exact.
pub fn wick_coefficient(k: usize, l: usize) -> Result<BigUint> {
    if k > l || l > MAX_L {
        return Err(Error::OrderOutOfRange(format!("need 0 <= k <= l <= {MAX_L}, got k={k}, l={l}")));
    }
    Ok(factorial(2 * l) / (factorial(2 * k) * pow2(l - k) * factorial(l - k)))
}

/// `α̃_{k,l} = (2l+1)!/((2k+1)! 2^{l-k} (l-k)!)`, exact.
pub fn wick_coefficient_odd(k: usize, l: usize) -> Result<BigUint> {
    if k > l || l > MAX_L {
        return Err(Error::OrderOutOfRange(format!("need 0 <= k <= l <= {MAX_L}, got k={k}, l={l}")));
    }
    Ok(factorial(2 * l + 1) / (factorial(2 * k + 1) * pow2(l - k) * factorial(l - k)))
}

/// Brute-force enumeration of the expansion terms for `n` factors:
/// entry `s` counts the ways to send `s` factors to `g` and pair the rest.
/// Memoized on the bitmask of unused factors.
pub fn pairing_counts(n: usize) -> Result<Vec<u64>> {
    if n > MAX_FACTORS {
        return Err(Error::OrderOutOfRange(format!("at most {MAX_FACTORS} factors, got {n}")));
    }
    fn rec(mask: u32, memo: &mut HashMap<u32, Vec<u64>>, n: usize) -> Vec<u64> {
        if mask == 0 {
            let mut v = vec![0; n + 1];
            v[0] = 1;
            return v;
        }
        if let Some(v) = memo.get(&mask) {
            return v.clone();
        }
        let i = mask.trailing_zeros();
        let rest = mask & !(1 << i);
        let mut out = vec![0u64; n + 1];
        // lowest factor pairs with g
        let sub = rec(rest, memo, n);
        for s in 0..n {
            out[s + 1] += sub[s];
        }
        // or with another factor
        let mut m = rest;
        while m != 0 {
            let j = m.trailing_zeros();
            m &= !(1 << j);
            let sub = rec(rest & !(1 << j), memo, n);
            for s in 0..=n {
                out[s] += sub[s];
            }
        }
        memo.insert(mask, out.clone());
        out
    }
    let mut memo = HashMap::new();
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    Ok(rec(full, &mut memo, n))
}

/// Centered Gaussian vector `(g_0, …, g_{n-1})` with one coordinate chosen
/// as the exponent `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianVectorSpec {
    pub dim: usize,
    /// Row-major `dim × dim` covariance.
    pub cov: Vec<f64>,
    pub exp_index: usize,
}

impl GaussianVectorSpec {
    pub fn new(cov: Vec<Vec<f64>>, exp_index: usize) -> Result<Self> {
        let dim = cov.len();
        let flat: Vec<f64> = cov.into_iter().flatten().collect();
        let s = GaussianVectorSpec { dim, cov: flat, exp_index };
        s.validate()?;
        Ok(s)
    }

    pub fn c(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim + j]
    }

    pub fn validate(&self) -> Result<()> {
        if self.cov.len() != self.dim * self.dim || self.exp_index >= self.dim {
            return Err(Error::Config("covariance shape or exp_index invalid".into()));
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                if (self.c(i, j) - self.c(j, i)).abs() > 1e-12 * (1.0 + self.c(i, j).abs()) {
                    return Err(Error::Config(format!("covariance not symmetric at ({i},{j})")));
                }
                let minor = self.c(i, i) * self.c(j, j) - self.c(i, j) * self.c(j, i);
                if minor < -1e-12 {
                    return Err(Error::Config(format!("principal minor ({i},{j}) negative")));
                }
            }
        }
        Ok(())
    }

    /// Lower Cholesky factor; semidefinite directions get zero columns.
    pub fn cholesky(&self) -> Vec<f64> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut s = self.c(j, j);
            for k in 0..j {
                s -= l[j * n + k] * l[j * n + k];
            }
            let piv = if s > 1e-14 * self.c(j, j).abs().max(1e-300) { s.sqrt() } else { 0.0 };
            l[j * n + j] = piv;
            for i in j + 1..n {
                let mut s = self.c(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = if piv > 0.0 { s / piv } else { 0.0 };
            }
        }
        l
    }

    /// Draws `count` samples (row-major) with a fixed seed.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let n = self.dim;
        let l = self.cholesky();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = vec![0.0; n];
        let mut out = vec![0.0; n * count];
        for s in 0..count {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            for i in 0..n {
                let mut v = 0.0;
                for k in 0..=i {
                    v += l[i * n + k] * z[k];
                }
                out[s * n + i] = v;
            }
        }
        out
    }
}

/// Sum over perfect matchings of the listed coordinates of the products of
/// pair covariances.
fn hafnian(spec: &GaussianVectorSpec, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    let first = idx[0];
    let mut total = 0.0;
    for p in 1..idx.len() {
        let c = spec.c(first, idx[p]);
        if c == 0.0 {
            continue;
        }
        let rest: Vec<usize> = idx[1..].iter().enumerate().filter(|(q, _)| q + 1 != p).map(|(_, &v)| v).collect();
        total += c * hafnian(spec, &rest);
    }
    total
}

/// `E(g_{i_1}…g_{i_m} e^g)` by the pairing expansion: each factor either
/// pairs with `g` (weight `E(g g_i)`) or with another factor.
pub fn exp_weighted_moment(spec: &GaussianVectorSpec, indices: &[usize]) -> Result<f64> {
    let m = indices.len();
    if m > MAX_FACTORS {
        return Err(Error::OrderOutOfRange(format!("at most {MAX_FACTORS} factors, got {m}")));
    }
    if indices.iter().any(|&i| i >= spec.dim) {
        return Err(Error::Config("index out of range".into()));
    }
    let g = spec.exp_index;
    let mut sum = 0.0;
    for mask in 0u32..(1 << m) {
        let mut w = 1.0;
        let mut rest = Vec::with_capacity(m);
        for (b, &i) in indices.iter().enumerate() {
            if mask & (1 << b) != 0 {
                w *= spec.c(g, i);
            } else {
                rest.push(i);
            }
        }
        if w == 0.0 || rest.len() % 2 == 1 {
            continue;
        }
        sum += w * hafnian(spec, &rest);
    }
    Ok(sum * (0.5 * spec.c(g, g)).exp())
}

/// Monte-Carlo estimate of `E(∏ g_i e^g)` with its standard error.
pub fn exp_weighted_moment_mc(spec: &GaussianVectorSpec, indices: &[usize], n: usize, seed: u64) -> (f64, f64) {
    let d = spec.dim;
    let xs = spec.sample(n, seed);
    let (mut s, mut s2) = (0.0, 0.0);
    for row in xs.chunks_exact(d) {
        let mut v = row[spec.exp_index].exp();
        for &i in indices {
            v *= row[i];
        }
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Test functions for the integration by parts identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `G ≡ 1`
    Constant,
    /// `G(x) = x_1`
    Linear,
    /// `G(x_1, x_2) = e^{x_1 + x_2}`
    ExpSum,
}

/// `|E(g G(g_1…)) - Σ E(g g_i) E(∂_i G)|` and the error scale it should be
/// judged against (zero for the exact rules).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpResidual {
    pub residual: f64,
    pub stderr: f64,
}

/// Gauss–Hermite nodes and weights for the standard normal density.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Golub–Welsch would need an eigensolver; Newton on the recurrence is
    // enough for the small orders used here.
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // initial guesses for the physicists' polynomials
        let mut z = if i == 0 {
            (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0)
        } else if i == 1 {
            x[0] - 1.14 * nf.powf(0.426) / x[0]
        } else if i == 2 {
            1.86 * x[1] - 0.86 * x[0]
        } else if i == 3 {
            1.91 * x[2] - 0.91 * x[1]
        } else {
            2.0 * x[i - 1] - x[i - 2]
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // convert from weight e^{-x²} to the standard normal density
    let s = std::f64::consts::PI.sqrt();
    let xs = x.iter().map(|v| v * 2f64.sqrt()).collect();
    let ws = w.iter().map(|v| v / s).collect();
    (xs, ws)
}

/// Evaluates both sides of the Gaussian integration by parts identity.
/// `G ≡ 1` and `G(x) = x_1` use Gauss–Hermite; `e^{x_1+x_2}` uses paired
/// Monte Carlo with `n_mc` draws.
pub fn ibp_identity_check(spec: &GaussianVectorSpec, test: TestFunction, n_mc: usize, seed: u64) -> Result<IbpResidual> {
    let g = spec.exp_index;
    let others: Vec<usize> = (0..spec.dim).filter(|&i| i != g).collect();
    match test {
        TestFunction::Constant => {
            let (x, w) = gauss_hermite_normal(20);
            let sd = spec.c(g, g).sqrt();
            let lhs: f64 = x.iter().zip(&w).map(|(x, w)| w * sd * x).sum();
            Ok(IbpResidual { residual: lhs.abs(), stderr: 0.0 })
        }
        TestFunction::Linear => {
            let i1 = *others.first().ok_or_else(|| Error::Config("need one coordinate besides g".into()))?;
            let sub = GaussianVectorSpec {
                dim: 2,
                cov: vec![spec.c(g, g), spec.c(g, i1), spec.c(i1, g), spec.c(i1, i1)],
                exp_index: 0,
            };
            let l = sub.cholesky();
            let (x, w) = gauss_hermite_normal(20);
            let mut lhs = 0.0;
            for (a, wa) in x.iter().zip(&w) {
                for (b, wb) in x.iter().zip(&w) {
                    let gv = l[0] * a;
                    let g1 = l[2] * a + l[3] * b;
                    lhs += wa * wb * gv * g1;
                }
            }
            let rhs = spec.c(g, i1);
            Ok(IbpResidual { residual: (lhs - rhs).abs(), stderr: 0.0 })
        }
        TestFunction::ExpSum => {
            if others.len() < 2 {
                return Err(Error::Config("need two coordinates besides g".into()));
            }
            let (i1, i2) = (others[0], others[1]);
            let c = spec.c(g, i1) + spec.c(g, i2);
            let xs = spec.sample(n_mc, seed);
            let (mut s, mut s2) = (0.0, 0.0);
            for row in xs.chunks_exact(spec.dim) {
                let e = (row[i1] + row[i2]).exp();
                let v = row[g] * e - c * e;
                s += v;
                s2 += v * v;
            }
            let n = n_mc as f64;
            let mean = s / n;
            let se = ((s2 / n - mean * mean).max(0.0) / n).sqrt();
            Ok(IbpResidual { residual: mean.abs(), stderr: se })
        }
    }
}

/// Both sides of the even (2m points) and odd (2m+1 points) exponential
/// pair bounds for a discrete measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KahaneBounds {
    pub lhs_even: f64,
    pub rhs_even: f64,
    pub lhs_odd: f64,
    pub rhs_odd: f64,
}

/// Default cap on the number of tuples summed exhaustively.
pub const KAHANE_BUDGET: u128 = 50_000_000;

/// Exhaustive evaluation over atoms with masses `weights` and pair kernel
/// `q(i, j)` (symmetric, nonnegative).
pub fn kahane_bound_check(weights: &[f64], q: &dyn Fn(usize, usize) -> f64, m: usize, budget: u128) -> Result<KahaneBounds> {
    let n = weights.len();
    let needed = (n as u128).pow(2 * m as u32 + 1);
    if needed > budget {
        return Err(Error::CombinatorialBlowup { needed, budget });
    }
    let qm: Vec<f64> = (0..n * n).map(|k| q(k / n, k % n)).collect();
    let lhs_even = tuple_sum(weights, &qm, 2 * m);
    let lhs_odd = tuple_sum(weights, &qm, 2 * m + 1);
    let sigma: f64 = weights.iter().sum();
    let mf = m as f64;
    let sup_even = (0..n)
        .map(|s| (0..n).map(|t| weights[t] * (mf * qm[t * n + s]).exp()).sum::<f64>())
        .fold(0.0, f64::max);
    let rhs_even = sigma * sup_even.powi(2 * m as i32 - 1);
    let mut sup_odd = 0.0f64;
    for s in 0..n {
        for st in 0..n {
            let a: f64 = (0..n).map(|t| weights[t] * qm[st * n + t].exp()).sum();
            let b: f64 = (0..n).map(|t| weights[t] * (mf * qm[s * n + t]).exp() * qm[st * n + t].exp()).sum();
            sup_odd = sup_odd.max(a * b.powi(2 * m as i32 - 1));
        }
    }
    Ok(KahaneBounds { lhs_even, rhs_even, lhs_odd, rhs_odd: sigma * sup_odd })
}

fn tuple_sum(w: &[f64], qm: &[f64], k: usize) -> f64 {
    let n = w.len();
    fn rec(w: &[f64], qm: &[f64], n: usize, chosen: &mut Vec<usize>, k: usize, acc_w: f64, acc_q: f64) -> f64 {
        if chosen.len() == k {
            return acc_w * acc_q.exp();
        }
        let mut s = 0.0;
        for t in 0..n {
            let add: f64 = chosen.iter().map(|&c| qm[c * n + t]).sum();
            chosen.push(t);
            s += rec(w, qm, n, chosen, k, acc_w * w[t], acc_q + add);
            chosen.pop();
        }
        s
    }
    rec(w, qm, n, &mut Vec::with_capacity(k), k, 1.0, 0.0)
}
