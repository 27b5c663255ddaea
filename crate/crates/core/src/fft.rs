//! Multi-dimensional complex FFT on C-order arrays, built from 1-D plans.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Forward and inverse plans for one array shape. Plans are shared, so one
/// instance can serve any number of threads.
#[derive(Clone)]
pub struct FftNd {
    shape: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("shape", &self.shape).finish()
    }
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        FftNd { shape: shape.to_vec(), fwd, inv }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform in place, scaled so that `inverse(forward(x)) = x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len());
        let nd = self.shape.len();
        // last axis is contiguous: transform all rows in one call
        let last = &plans[nd - 1];
        let mut scratch = vec![Complex64::default(); last.get_inplace_scratch_len()];
        last.process_with_scratch(data, &mut scratch);
        // remaining axes go through a gathered line buffer
        for ax in (0..nd - 1).rev() {
            let n = self.shape[ax];
            let stride: usize = self.shape[ax + 1..].iter().product();
            let outer: usize = self.shape[..ax].iter().product();
            let plan = &plans[ax];
            let mut line = vec![Complex64::default(); n];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for o in 0..outer {
                let base = o * n * stride;
                for s in 0..stride {
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[base + i * stride + s];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride + s] = *v;
                    }
                }
            }
        }
    }
}

/// Signed integer frequency of index `i` on an axis of length `n`.
pub fn freq_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Signed minimal-image offset of index `i` on a periodic axis of length `n`.
pub fn min_image(i: usize, n: usize) -> i64 {
    freq_index(i, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_delta() {
        let f = FftNd::new(&[4, 6, 5]);
        let mut x: Vec<Complex64> = (0..f.len()).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let orig = x.clone();
        f.forward(&mut x);
        f.inverse(&mut x);
        for (a, b) in x.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
        // a delta at the origin transforms to all ones
        let mut d = vec![Complex64::default(); f.len()];
        d[0] = Complex64::new(1.0, 0.0);
        f.forward(&mut d);
        assert!(d.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn matches_direct_dft_2d() {
        let (n0, n1) = (3, 4);
        let f = FftNd::new(&[n0, n1]);
        let x: Vec<Complex64> = (0..12).map(|i| Complex64::new((i * i % 7) as f64, (i % 3) as f64)).collect();
        let mut y = x.clone();
        f.forward(&mut y);
        for k0 in 0..n0 {
            for k1 in 0..n1 {
                let mut s = Complex64::default();
                for j0 in 0..n0 {
                    for j1 in 0..n1 {
                        let ph = -2.0 * std::f64::consts::PI * ((k0 * j0) as f64 / n0 as f64 + (k1 * j1) as f64 / n1 as f64);
                        s += x[j0 * n1 + j1] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((s - y[k0 * n1 + k1]).norm() < 1e-10);
            }
        }
    }
}
