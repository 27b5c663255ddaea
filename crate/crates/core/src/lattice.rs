//! Regular lattices and discrete white noise.

use crate::error::{Error, Result};
use crate::kernels::FieldParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// How the field window sits inside the FFT grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Window strictly inside a halo of `padding` cells on each side; the
    /// circular wrap never reaches the window.
    Padded,
    /// The whole grid is the window and fields are periodic.
    Periodic,
}

/// A `d`-dimensional grid of cubic cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub d: usize,
    /// Cells per axis in the physical window.
    pub n_per_axis: usize,
    /// Cell width.
    pub dx: f64,
    /// Coordinate of the first window cell.
    pub origin: Vec<f64>,
    /// Halo cells added on each side of every axis.
    pub padding: usize,
    pub boundary: Boundary,
}

impl Lattice {
    /// Window of `n` cells per axis with the minimal halo for correlation
    /// length `r`, i.e. `ceil(4R/dx)` cells on each side.
    pub fn padded(d: usize, n: usize, dx: f64, r: f64) -> Self {
        Lattice {
            d,
            n_per_axis: n,
            dx,
            origin: vec![0.0; d],
            padding: Self::min_padding(r, dx),
            boundary: Boundary::Padded,
        }
    }

    pub fn periodic(d: usize, n: usize, dx: f64) -> Self {
        Lattice { d, n_per_axis: n, dx, origin: vec![0.0; d], padding: 0, boundary: Boundary::Periodic }
    }

    pub fn min_padding(r: f64, dx: f64) -> usize {
        (4.0 * r / dx - 1e-9).ceil() as usize
    }

    /// Grid points per axis including the halo.
    pub fn total_per_axis(&self) -> usize {
        self.n_per_axis + 2 * self.padding
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.total_per_axis(); self.d]
    }

    pub fn n_cells(&self) -> usize {
        self.total_per_axis().pow(self.d as u32)
    }

    pub fn window_cells(&self) -> usize {
        self.n_per_axis.pow(self.d as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.d as i32)
    }

    /// Checks the resolution and halo requirements for `params`.
    pub fn validate(&self, params: &FieldParams) -> Result<()> {
        if self.d != params.d || self.n_per_axis == 0 || !(self.dx > 0.0) || self.origin.len() != self.d {
            return Err(Error::Config("lattice shape inconsistent with the parameters".into()));
        }
        let limit = params.epsilon / 4.0;
        if self.dx > limit * (1.0 + 1e-12) {
            return Err(Error::LatticeUnderResolved { dx: self.dx, limit });
        }
        match self.boundary {
            Boundary::Padded => {
                if self.padding < Self::min_padding(params.r, self.dx) {
                    return Err(Error::Config(format!(
                        "padding {} below the required {} cells (4R per side)",
                        self.padding,
                        Self::min_padding(params.r, self.dx)
                    )));
                }
            }
            Boundary::Periodic => {
                // kernels of radius 2R + ε must fit in half the box
                let half = self.n_per_axis as f64 * self.dx / 2.0;
                if 2.0 * params.r + params.epsilon > half * (1.0 + 1e-12) {
                    return Err(Error::Config("periodic box smaller than twice the kernel support".into()));
                }
            }
        }
        Ok(())
    }

    /// Flat C-order index of the window cell with multi-index `w`.
    pub fn window_to_flat(&self, w: &[usize]) -> usize {
        let n = self.total_per_axis();
        w.iter().fold(0, |acc, &i| acc * n + i + self.padding)
    }

    /// Flat indices of every window cell in C order.
    pub fn window_indices(&self) -> Vec<usize> {
        let n = self.n_per_axis;
        let mut out = Vec::with_capacity(self.window_cells());
        let mut idx = vec![0usize; self.d];
        for _ in 0..self.window_cells() {
            out.push(self.window_to_flat(&idx));
            for a in (0..self.d).rev() {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }
}

/// Channels drawn for one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Channels {
    pub w0: bool,
    pub w1: bool,
    pub w_vec: bool,
}

impl Channels {
    pub const SCALAR: Channels = Channels { w0: true, w1: true, w_vec: false };
    pub const ALL: Channels = Channels { w0: true, w1: true, w_vec: true };
}

/// Cell integrals of independent white noises: centered Gaussians of
/// variance `dx^d`, one lattice per channel (empty when not drawn).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub seed: u64,
    pub realization: u64,
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    /// Three components of the vector noise.
    pub w_vec: Vec<Vec<f64>>,
}

/// Stream counter of `channel` in `realization`: independent substreams of
/// one master key, so any realization can be drawn on its own.
fn stream_id(realization: u64, channel: u64) -> u64 {
    realization.wrapping_mul(8).wrapping_add(channel)
}

/// Fills `n` standard Gaussians scaled by `sd` from the given substream.
pub fn gaussian_stream(seed: u64, realization: u64, channel: u64, n: usize, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(realization, channel));
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

impl NoiseDraw {
    pub fn sample(lattice: &Lattice, seed: u64, realization: u64, ch: Channels) -> Self {
        let n = lattice.n_cells();
        let sd = lattice.cell_volume().sqrt();
        let draw = |c: u64, on: bool| if on { gaussian_stream(seed, realization, c, n, sd) } else { Vec::new() };
        NoiseDraw {
            seed,
            realization,
            w0: draw(0, ch.w0),
            w1: draw(1, ch.w1),
            w_vec: if ch.w_vec { (2..5).map(|c| draw(c, true)).collect() } else { Vec::new() },
        }
    }

    /// All-zero noise of the lattice size (for degenerate checks).
    pub fn zeros(lattice: &Lattice, ch: Channels) -> Self {
        let n = lattice.n_cells();
        let z = |on: bool| if on { vec![0.0; n] } else { Vec::new() };
        NoiseDraw {
            seed: 0,
            realization: 0,
            w0: z(ch.w0),
            w1: z(ch.w1),
            w_vec: if ch.w_vec { vec![vec![0.0; n]; 3] } else { Vec::new() },
        }
    }
}

/// Realization 0 of the scalar channels, plus the vector channel in d = 3.
pub fn sample_noise(lattice: &Lattice, seed: u64) -> NoiseDraw {
    let ch = if lattice.d == 3 { Channels::ALL } else { Channels::SCALAR };
    NoiseDraw::sample(lattice, seed, 0, ch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_indices_skip_halo() {
        let l = Lattice { d: 2, n_per_axis: 2, dx: 1.0, origin: vec![0.0; 2], padding: 1, boundary: Boundary::Padded };
        assert_eq!(l.total_per_axis(), 4);
        assert_eq!(l.window_indices(), vec![5, 6, 9, 10]);
    }

    #[test]
    fn resolution_gate() {
        let p = FieldParams { epsilon: 4.0 / 1024.0, ..Default::default() };
        let ok = Lattice::padded(1, 64, 1.0 / 1024.0, 1.0);
        assert!(ok.validate(&p).is_ok());
        let coarse = Lattice::padded(1, 64, 2.0 / 1024.0, 1.0);
        assert!(matches!(coarse.validate(&p), Err(Error::LatticeUnderResolved { .. })));
        let mut thin = ok.clone();
        thin.padding -= 1;
        assert!(thin.validate(&p).is_err());
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a = gaussian_stream(9, 3, 0, 16, 1.0);
        assert_eq!(a, gaussian_stream(9, 3, 0, 16, 1.0));
        assert_ne!(a, gaussian_stream(9, 3, 1, 16, 1.0));
        assert_ne!(a, gaussian_stream(9, 4, 0, 16, 1.0));
        assert_ne!(a, gaussian_stream(10, 3, 0, 16, 1.0));
    }
}
