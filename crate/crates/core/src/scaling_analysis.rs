//! Structure functions of realization batches, exponent fits and the
//! symmetry, tightness and divergence diagnostics.

use crate::error::{Error, Result};
use crate::fft::{freq_index, FftNd};
use crate::kernels::FieldParams;
use crate::lattice::{Boundary, Lattice};
use crate::synthesis::FieldRealization;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Minimum number of lags inside a fit window.
pub const MIN_FIT_LAGS: usize = 5;

/// What to measure on each realization.
///
/// The lag direction is the lattice vector `step` (e.g. `[1, 0]` or
/// `[1, 1]`); lag `λ` is reached in `λ / (dx |step|)` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub component: usize,
    pub step: Vec<i64>,
    pub lags: Vec<f64>,
    pub orders: Vec<usize>,
    /// Signed moments `E[Δ^q]` instead of `E[|Δ|^q]`.
    pub signed: bool,
    /// Project the increment on the lag direction (longitudinal increment of
    /// a vector field) instead of reading one component.
    #[serde(default)]
    pub longitudinal: bool,
}

impl StructureSpec {
    pub fn new(component: usize, step: Vec<i64>, lags: Vec<f64>, orders: Vec<usize>, signed: bool) -> Self {
        StructureSpec { component, step, lags, orders, signed, longitudinal: false }
    }

    fn step_len(&self) -> f64 {
        (self.step.iter().map(|s| (s * s) as f64).sum::<f64>()).sqrt()
    }

    /// Unit lag direction.
    pub fn direction(&self) -> Vec<f64> {
        let n = self.step_len();
        self.step.iter().map(|&s| s as f64 / n).collect()
    }

    /// Step counts of every lag.
    pub fn lag_steps(&self, lattice: &Lattice) -> Result<Vec<usize>> {
        if self.step.len() != lattice.d || self.step.iter().all(|&s| s == 0) {
            return Err(Error::Config("lag step must be a nonzero lattice vector of dimension d".into()));
        }
        let unit = lattice.dx * self.step_len();
        self.lags
            .iter()
            .map(|&lam| {
                let m = lam / unit;
                let k = m.round();
                if !(k >= 1.0) || (m - k).abs() > 1e-9 * m.max(1.0) {
                    Err(Error::LagUnresolvable(lam))
                } else {
                    Ok(k as usize)
                }
            })
            .collect()
    }

    /// Per-realization averages `[lag][order]` over base points on a grid of
    /// stride equal to the lag's step count.
    pub fn realization_row(&self, f: &FieldRealization) -> Result<Vec<Vec<f64>>> {
        let lat = &f.lattice;
        let d = lat.d;
        let steps = self.lag_steps(lat)?;
        let ncomp = f.values.len();
        if self.longitudinal {
            if ncomp != d {
                return Err(Error::Config("longitudinal increments need a d-component field".into()));
            }
        } else if self.component >= ncomp {
            return Err(Error::Config(format!("component {} out of range", self.component)));
        }
        let n = lat.n_per_axis;
        let periodic = lat.boundary == Boundary::Periodic;
        let dir = self.direction();
        let mut out = Vec::with_capacity(steps.len());
        for (&m, &lam) in steps.iter().zip(&self.lags) {
            let off: Vec<i64> = self.step.iter().map(|&s| s * m as i64).collect();
            // base coordinates per axis
            let axes: Vec<Vec<usize>> = off
                .iter()
                .map(|&o| {
                    let range: Vec<usize> = if periodic {
                        (0..n).collect()
                    } else {
                        let lo = (-o).max(0) as usize;
                        let hi = (n as i64 - o.max(0)).max(0) as usize;
                        (lo..hi.max(lo)).collect()
                    };
                    range.into_iter().step_by(m).collect()
                })
                .collect();
            let count: usize = axes.iter().map(|a| a.len()).product();
            if count == 0 {
                return Err(Error::WindowTooSmall(format!("lag {lam} leaves no base point in the window")));
            }
            let mut acc = vec![0.0; self.orders.len()];
            let mut idx = vec![0usize; d];
            let flat = |c: &[usize]| c.iter().fold(0usize, |a, &i| a * n + i);
            let shift = |c: &[usize]| -> Vec<usize> {
                c.iter().zip(&off).map(|(&i, &o)| (i as i64 + o).rem_euclid(n as i64) as usize).collect()
            };
            let mut coord = vec![0usize; d];
            for _ in 0..count {
                for a in 0..d {
                    coord[a] = axes[a][idx[a]];
                }
                let (i0, i1) = (flat(&coord), flat(&shift(&coord)));
                let delta = if self.longitudinal {
                    (0..d).map(|j| (f.values[j][i1] - f.values[j][i0]) * dir[j]).sum::<f64>()
                } else {
                    f.values[self.component][i1] - f.values[self.component][i0]
                };
                let base = if self.signed { delta } else { delta.abs() };
                for (a, &q) in acc.iter_mut().zip(&self.orders) {
                    *a += base.powi(q as i32);
                }
                for a in (0..d).rev() {
                    idx[a] += 1;
                    if idx[a] < axes[a].len() {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            out.push(acc.into_iter().map(|s| s / count as f64).collect());
        }
        Ok(out)
    }

    /// Table from per-realization rows, in realization order.
    pub fn table(&self, lattice: &Lattice, rows: Vec<Vec<Vec<f64>>>) -> Result<StructureFunctionTable> {
        let steps = self.lag_steps(lattice)?;
        let n = rows.len();
        if n < 2 {
            return Err(Error::WindowTooSmall("jackknife errors need at least two realizations".into()));
        }
        let (nl, nq) = (self.lags.len(), self.orders.len());
        let mut mean = vec![vec![0.0; nq]; nl];
        for r in &rows {
            for (a, row) in r.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    mean[a][b] += v;
                }
            }
        }
        let nf = n as f64;
        mean.iter_mut().flatten().for_each(|m| *m /= nf);
        let mut var = vec![vec![0.0; nq]; nl];
        for r in &rows {
            for (a, row) in r.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    var[a][b] += (v - mean[a][b]).powi(2);
                }
            }
        }
        // the jackknife error of a mean is the usual standard error
        let stderr = var.iter().map(|row| row.iter().map(|v| (v / (nf - 1.0) / nf).sqrt()).collect()).collect();
        Ok(StructureFunctionTable {
            lags: self.lags.clone(),
            lag_steps: steps,
            orders: self.orders.clone(),
            signed: self.signed,
            direction: self.direction(),
            component: self.component,
            mean,
            stderr,
            n_realizations: n,
            rows,
        })
    }
}

/// Structure-function estimates with jackknife errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFunctionTable {
    pub lags: Vec<f64>,
    pub lag_steps: Vec<usize>,
    pub orders: Vec<usize>,
    pub signed: bool,
    pub direction: Vec<f64>,
    pub component: usize,
    /// `[lag][order]`
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub n_realizations: usize,
    /// Per-realization averages `[realization][lag][order]`; empty for
    /// tables built from summary values.
    #[serde(skip)]
    pub rows: Vec<Vec<Vec<f64>>>,
}

impl StructureFunctionTable {
    /// Table from summary values only; fits then use the weighted
    /// least-squares error instead of the jackknife.
    pub fn from_summary(lags: Vec<f64>, orders: Vec<usize>, mean: Vec<Vec<f64>>, stderr: Vec<Vec<f64>>, signed: bool) -> Self {
        StructureFunctionTable {
            lag_steps: vec![0; lags.len()],
            lags,
            orders,
            signed,
            direction: vec![1.0],
            component: 0,
            mean,
            stderr,
            n_realizations: 0,
            rows: Vec::new(),
        }
    }

    fn order_index(&self, q: usize) -> Result<usize> {
        self.orders
            .iter()
            .position(|&o| o == q)
            .ok_or_else(|| Error::Config(format!("order {q} missing from the table")))
    }

    /// Long-format CSV `lag,q,signed,value,err`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lag,q,signed,value,err\n");
        for (a, lam) in self.lags.iter().enumerate() {
            for (b, q) in self.orders.iter().enumerate() {
                s.push_str(&format!("{lam:.12e},{q},{},{:.12e},{:.6e}\n", self.signed, self.mean[a][b], self.stderr[a][b]));
            }
        }
        s
    }
}

/// Averages over `batch` and assembles the table.
pub fn structure_function(batch: &[FieldRealization], spec: &StructureSpec) -> Result<StructureFunctionTable> {
    let first = batch.first().ok_or_else(|| Error::WindowTooSmall("empty batch".into()))?;
    if batch.iter().any(|f| f.lattice != first.lattice || f.params != first.params) {
        return Err(Error::Config("realizations must share parameters and lattice".into()));
    }
    let rows = batch.iter().map(|f| spec.realization_row(f)).collect::<Result<Vec<_>>>()?;
    spec.table(&first.lattice, rows)
}

/// Lag window strictly inside `(4ε, R/2)`.
pub fn default_window(params: &FieldParams) -> (f64, f64) {
    (4.0 * params.epsilon, params.r / 2.0)
}

/// Near-geometric ladder of lags `m·unit` strictly inside `(lo, hi)`, with
/// `per_octave` rungs per factor 2 and integer `m`.
pub fn lag_ladder(unit: f64, lo: f64, hi: f64, per_octave: usize) -> Vec<f64> {
    let mut ms: Vec<u64> = Vec::new();
    for k in 0..64 * per_octave.max(1) {
        let m = 2f64.powf(k as f64 / per_octave.max(1) as f64).round() as u64;
        let lam = m as f64 * unit;
        if lam >= hi * (1.0 - 1e-12) {
            break;
        }
        if lam > lo * (1.0 + 1e-12) && ms.last() != Some(&m) {
            ms.push(m);
        }
    }
    ms.into_iter().map(|m| m as f64 * unit).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub q: usize,
    pub zeta_hat: f64,
    /// 95% half-width.
    pub ci95: f64,
    pub fit_window: (f64, f64),
    pub r2: f64,
    /// Sign of the fitted moments (signed tables may be negative).
    pub sign: f64,
    pub n_lags: usize,
}

/// Weighted least-squares slope and intercept of `y` on `x`.
fn wls(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxx)
}

fn log_points(vals: &[f64], q: usize, signed: bool) -> Result<(f64, Vec<f64>)> {
    let sign = if vals.iter().all(|&v| v > 0.0) {
        1.0
    } else if signed && vals.iter().all(|&v| v < 0.0) {
        -1.0
    } else {
        return Err(Error::DegenerateFit(format!("order {q} has non-positive estimates in the window")));
    };
    Ok((sign, vals.iter().map(|v| (sign * v).ln()).collect()))
}

/// Fits `log|E| = ζ log λ + c` over the lags inside the open window.
pub fn fit_exponents_in(table: &StructureFunctionTable, window: (f64, f64)) -> Result<Vec<ExponentFit>> {
    let sel: Vec<usize> = (0..table.lags.len())
        .filter(|&i| table.lags[i] > window.0 * (1.0 + 1e-12) && table.lags[i] < window.1 * (1.0 - 1e-12))
        .collect();
    if sel.len() < MIN_FIT_LAGS {
        return Err(Error::WindowTooSmall(format!(
            "{} lags inside ({}, {}), need {MIN_FIT_LAGS}",
            sel.len(),
            window.0,
            window.1
        )));
    }
    let x: Vec<f64> = sel.iter().map(|&i| table.lags[i].ln()).collect();
    let lo = sel.iter().map(|&i| table.lags[i]).fold(f64::INFINITY, f64::min);
    let hi = sel.iter().map(|&i| table.lags[i]).fold(0.0, f64::max);
    let mut fits = Vec::with_capacity(table.orders.len());
    for (b, &q) in table.orders.iter().enumerate() {
        let vals: Vec<f64> = sel.iter().map(|&i| table.mean[i][b]).collect();
        let errs: Vec<f64> = sel.iter().map(|&i| table.stderr[i][b]).collect();
        if errs.iter().any(|e| !e.is_finite()) {
            return Err(Error::DegenerateFit(format!("order {q} has non-finite errors")));
        }
        let (sign, y) = log_points(&vals, q, table.signed)?;
        // var(log E) ≈ (se/E)²; exact tables get equal weights
        let rel: Vec<f64> = vals.iter().zip(&errs).map(|(v, e)| e / v.abs()).collect();
        let w: Vec<f64> = if rel.iter().all(|&r| r > 0.0) { rel.iter().map(|r| 1.0 / (r * r)).collect() } else { vec![1.0; sel.len()] };
        let (slope, icpt, sxx) = wls(&x, &y, &w);
        let sw: f64 = w.iter().sum();
        let my = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
        let ss_tot: f64 = y.iter().zip(&w).map(|(a, b)| b * (a - my).powi(2)).sum();
        let ss_res: f64 = x.iter().zip(&y).zip(&w).map(|((a, c), b)| b * (c - icpt - slope * a).powi(2)).sum();
        let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        let se = if table.rows.len() >= 2 {
            jackknife_slope_se(table, &sel, b, &x, &w, sign)
        } else if rel.iter().all(|&r| r > 0.0) {
            (1.0 / sxx).sqrt()
        } else {
            0.0
        };
        fits.push(ExponentFit { q, zeta_hat: slope, ci95: 1.96 * se, fit_window: (lo, hi), r2, sign, n_lags: sel.len() });
    }
    Ok(fits)
}

/// Leave-one-realization-out spread of the fitted slope, weights held fixed.
fn jackknife_slope_se(table: &StructureFunctionTable, sel: &[usize], b: usize, x: &[f64], w: &[f64], sign: f64) -> f64 {
    let n = table.rows.len();
    let nf = n as f64;
    let totals: Vec<f64> = sel.iter().map(|&i| table.mean[i][b] * nf).collect();
    let mut slopes = Vec::with_capacity(n);
    for r in &table.rows {
        let y: Vec<f64> = sel
            .iter()
            .zip(&totals)
            .map(|(&i, t)| (sign * (t - r[i][b]) / (nf - 1.0)).max(f64::MIN_POSITIVE).ln())
            .collect();
        slopes.push(wls(x, &y, w).0);
    }
    let m = slopes.iter().sum::<f64>() / nf;
    ((nf - 1.0) / nf * slopes.iter().map(|s| (s - m).powi(2)).sum::<f64>()).sqrt()
}

/// Fits over [`default_window`].
pub fn fit_exponents(table: &StructureFunctionTable, params: &FieldParams) -> Result<Vec<ExponentFit>> {
    fit_exponents_in(table, default_window(params))
}

/// Long-format CSV of fits.
pub fn fits_csv(fits: &[ExponentFit]) -> String {
    let mut s = String::from("q,zeta_hat,ci95,lambda_min,lambda_max,r2,sign,n_lags\n");
    for f in fits {
        s.push_str(&format!(
            "{},{:.12e},{:.6e},{:.6e},{:.6e},{:.8},{},{}\n",
            f.q, f.zeta_hat, f.ci95, f.fit_window.0, f.fit_window.1, f.r2, f.sign, f.n_lags
        ));
    }
    s
}

/// Standardized third moment at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewnessTest {
    pub lag: f64,
    /// `E[Δ³]/E[Δ²]^{3/2}`
    pub statistic: f64,
    pub stderr: f64,
    /// `statistic / stderr`
    pub z: f64,
    /// Chebyshev bound `min(1, 1/z²)` on the two-sided null probability.
    pub p_value_bound: f64,
}

/// Skewness of the increments at lag index `lag_index` of a signed table
/// holding orders 2 and 3.
pub fn skewness_test(table: &StructureFunctionTable, lag_index: usize) -> Result<SkewnessTest> {
    if !table.signed {
        return Err(Error::Config("skewness needs a signed table".into()));
    }
    let (i2, i3) = (table.order_index(2)?, table.order_index(3)?);
    let lag = *table.lags.get(lag_index).ok_or_else(|| Error::Config("lag index out of range".into()))?;
    let skew = |m2: f64, m3: f64| m3 / m2.max(f64::MIN_POSITIVE).powf(1.5);
    let statistic = skew(table.mean[lag_index][i2], table.mean[lag_index][i3]);
    let n = table.rows.len();
    let stderr = if n >= 2 {
        let nf = n as f64;
        let (t2, t3) = (table.mean[lag_index][i2] * nf, table.mean[lag_index][i3] * nf);
        let loo: Vec<f64> = table
            .rows
            .iter()
            .map(|r| skew((t2 - r[lag_index][i2]) / (nf - 1.0), (t3 - r[lag_index][i3]) / (nf - 1.0)))
            .collect();
        let m = loo.iter().sum::<f64>() / nf;
        ((nf - 1.0) / nf * loo.iter().map(|s| (s - m).powi(2)).sum::<f64>()).sqrt()
    } else {
        // delta method on the summary errors, treating the orders as independent
        let m2 = table.mean[lag_index][i2];
        let (e2, e3) = (table.stderr[lag_index][i2], table.stderr[lag_index][i3]);
        ((e3 / m2.powf(1.5)).powi(2) + (1.5 * statistic * e2 / m2).powi(2)).sqrt()
    };
    let z = if stderr > 0.0 { statistic / stderr } else { 0.0 };
    let p_value_bound = if z == 0.0 { 1.0 } else { (1.0 / (z * z)).min(1.0) };
    Ok(SkewnessTest { lag, statistic, stderr, z, p_value_bound })
}

/// Slopes of the `2l`-th absolute structure function along an ε ladder
/// against the moment-bound exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessVerdict {
    /// `l(2α-d) - 2γ²ω_d l(l-1)`
    pub bound: f64,
    /// `(ε, fitted slope, ci95)` per rung.
    pub slopes: Vec<(f64, f64, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that every rung's fitted `2l`-th order slope is at least the
/// bound minus `tolerance`. Rungs are `(params at that ε, table)`.
pub fn tightness_check(
    rungs: &[(FieldParams, StructureFunctionTable)],
    l: usize,
    gamma: f64,
    tolerance: f64,
) -> Result<TightnessVerdict> {
    if rungs.len() < 2 {
        return Err(Error::WindowTooSmall("tightness needs at least two ε rungs".into()));
    }
    let p0 = rungs[0].0;
    if !(p0.gamma1 < gamma || (p0.gamma1 == 0.0 && gamma == 0.0)) {
        return Err(Error::GateViolated("γ₁² < γ²".into()));
    }
    let d = p0.d as f64;
    let lf = l as f64;
    let bound = lf * (2.0 * p0.alpha - d) - 2.0 * gamma * gamma * p0.omega_d() * lf * (lf - 1.0);
    let mut slopes = Vec::with_capacity(rungs.len());
    for (p, t) in rungs {
        if t.signed && l % 2 == 1 {
            return Err(Error::Config("odd half-order needs an absolute table".into()));
        }
        let fits = fit_exponents(t, p)?;
        let fit = fits
            .iter()
            .find(|f| f.q == 2 * l)
            .ok_or_else(|| Error::Config(format!("order {} missing from a rung", 2 * l)))?;
        slopes.push((p.epsilon, fit.zeta_hat, fit.ci95));
    }
    let pass = slopes.iter().all(|s| s.1 >= bound - tolerance);
    Ok(TightnessVerdict { bound, slopes, tolerance, pass })
}

/// `RMS(div U) / RMS(|∇U|)` by spectral differentiation on a periodic
/// 3-D lattice. Nyquist modes are dropped from both derivatives.
pub fn divergence_check(f: &FieldRealization) -> Result<f64> {
    let lat = &f.lattice;
    if lat.d != 3 {
        return Err(Error::DimensionUnsupported(lat.d));
    }
    if lat.boundary != Boundary::Periodic || f.values.len() != 3 {
        return Err(Error::Config("divergence check needs a periodic 3-component field".into()));
    }
    let n = lat.n_per_axis;
    let fft = FftNd::new(&[n, n, n]);
    let len = fft.len();
    let k = |i: usize| -> f64 {
        let m = freq_index(i, n);
        if n % 2 == 0 && m == (n / 2) as i64 {
            0.0
        } else {
            2.0 * std::f64::consts::PI * m as f64 / (n as f64 * lat.dx)
        }
    };
    let wave: Vec<[f64; 3]> = (0..len).map(|i| [k(i / (n * n)), k((i / n) % n), k(i % n)]).collect();
    let mut div = vec![Complex64::default(); len];
    let mut grad2 = 0.0;
    for (j, comp) in f.values.iter().enumerate() {
        let mut u: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut u);
        for (i, v) in u.iter().enumerate() {
            let kv = wave[i];
            div[i] += Complex64::new(0.0, kv[j]) * v;
            // Parseval: Σ|∂u|² = Σ|k û|²/N
            grad2 += (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) * v.norm_sqr();
        }
    }
    let div2: f64 = div.iter().map(|v| v.norm_sqr()).sum();
    if grad2 == 0.0 {
        return Ok(0.0);
    }
    Ok((div2 / grad2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wls_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let (s, c, _) = wls(&x, &y, &[1.0, 2.0, 1.0, 3.0]);
        assert!((s - 2.0).abs() < 1e-14 && (c - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lag_ladder_stays_inside() {
        let l = lag_ladder(1.0 / 1024.0, 4.0 / 1024.0, 0.5, 1);
        assert_eq!(l.len(), 6);
        let dense = lag_ladder(1.0, 16.0, 70.0, 2);
        assert_eq!(dense, vec![23.0, 32.0, 45.0, 64.0]);
        assert!(l.iter().all(|&v| v > 4.0 / 1024.0 && v < 0.5));
    }
}
