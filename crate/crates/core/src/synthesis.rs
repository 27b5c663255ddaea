//! Lattice synthesis of the random fields: Gaussian base field, chaos
//! density, the X and X₀ families, the auxiliary pair (Y, Z) and the
//! divergence-free Biot–Savart field.
//!
//! Every field is a discrete convolution of lattice kernels with cell
//! noises. Kernels are sampled at minimal-image offsets of the FFT grid and
//! convolved spectrally; [`Synthesizer::synthesize_direct`] evaluates the
//! same sums explicitly for verification on small lattices.

use crate::error::{Error, Result};
use crate::fft::{freq_index, min_image, FftNd};
use crate::kernels::{cutoff, estimate_c1, omega_d, FieldParams, KernelSuite, Mollifier, Radial, radial_conv};
use crate::lattice::{Boundary, Channels, Lattice, NoiseDraw};
use crate::quad::{integrate, QuadOpts};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Kind of synthesized object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    GaussianBase,
    ChaosMeasure,
    XFamily,
    X0Family,
    BiotSavart,
    AuxY,
    AuxZ,
}

impl FieldKind {
    /// Noise channels the kind consumes.
    pub fn channels(self) -> Channels {
        match self {
            FieldKind::GaussianBase => Channels { w0: true, ..Default::default() },
            FieldKind::ChaosMeasure => Channels { w1: true, ..Default::default() },
            FieldKind::X0Family => Channels { w0: true, ..Default::default() },
            FieldKind::BiotSavart => Channels { w_vec: true, ..Default::default() },
            FieldKind::XFamily | FieldKind::AuxY | FieldKind::AuxZ => Channels::SCALAR,
        }
    }
}

/// One synthesized sample restricted to the physical window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    pub kind: FieldKind,
    /// One C-order window array per component (a single one for the chaos
    /// density).
    pub values: Vec<Vec<f64>>,
    pub params: FieldParams,
    pub lattice: Lattice,
    pub noise_seed: u64,
    pub realization: u64,
}

impl FieldRealization {
    pub fn components(&self) -> usize {
        self.values.len()
    }

    /// Rejects NaN/Inf entries and non-positive chaos densities.
    pub fn validate(&self) -> Result<()> {
        for c in &self.values {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{:?} realization has non-finite values", self.kind)));
            }
            if self.kind == FieldKind::ChaosMeasure && c.iter().any(|&v| v <= 0.0) {
                return Err(Error::Config("chaos density must be positive".into()));
            }
        }
        Ok(())
    }
}

/// JSON sidecar written next to a binary field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub kind: FieldKind,
    pub components: usize,
    /// Window shape, C order.
    pub shape: Vec<usize>,
    pub layout: String,
    pub lattice: Lattice,
    pub params: FieldParams,
    pub noise_seed: u64,
    pub realization: u64,
}

impl FieldRealization {
    /// Writes `<stem>.bin` (little-endian f64, components one after the
    /// other, each in C order) and `<stem>.json`.
    pub fn write_dump(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let bin = dir.join(format!("{stem}.bin"));
        let json = dir.join(format!("{stem}.json"));
        let mut bytes = Vec::with_capacity(8 * self.values.iter().map(Vec::len).sum::<usize>());
        for v in self.values.iter().flatten() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&bin, bytes)?;
        let side = DumpSidecar {
            kind: self.kind,
            components: self.components(),
            shape: vec![self.lattice.n_per_axis; self.lattice.d],
            layout: "f64 little-endian, component-major, C order".into(),
            lattice: self.lattice.clone(),
            params: self.params,
            noise_seed: self.noise_seed,
            realization: self.realization,
        };
        let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(&json, text)?;
        Ok((bin, json))
    }

    /// Reads a dump written by [`FieldRealization::write_dump`].
    pub fn read_dump(dir: &Path, stem: &str) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(format!("{stem}.json")))?;
        let side: DumpSidecar = serde_json::from_str(&text).map_err(|e| Error::Io(e.to_string()))?;
        let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
        let n: usize = side.shape.iter().product();
        if bytes.len() != 8 * n * side.components {
            return Err(Error::Io("dump size does not match its sidecar".into()));
        }
        let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(FieldRealization {
            kind: side.kind,
            values: vals.chunks(n).map(|c| c.to_vec()).collect(),
            params: side.params,
            lattice: side.lattice,
            noise_seed: side.noise_seed,
            realization: side.realization,
        })
    }

    /// CSV of the line through the window start along axis 0
    /// (`x,component_0,…`).
    pub fn slice_csv(&self) -> String {
        let n = self.lattice.n_per_axis;
        let stride = n.pow(self.lattice.d as u32 - 1);
        let mut out = String::from("x");
        for c in 0..self.components() {
            out.push_str(&format!(",c{c}"));
        }
        out.push('\n');
        for i in 0..n {
            out.push_str(&format!("{}", self.lattice.origin[0] + i as f64 * self.lattice.dx));
            for c in &self.values {
                out.push_str(&format!(",{}", c[i * stride]));
            }
            out.push('\n');
        }
        out
    }
}

/// Normalization constants of the lattice fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConstants {
    /// `Σ k_ε(y)² dx^d`, the exact variance of the lattice exponent field.
    pub var_k: f64,
    /// `k_ε(0)`.
    pub k0: f64,
    /// Amplitude of the asymmetric exponent part of the X family.
    pub gamma0_eps: f64,
    /// X family normalization `(γ₀(ε)² + γ₁²) var_k`.
    pub c_eps_x: f64,
    /// X₀ normalization solving `γ₀ k0 e^{-C + γ₀² var_k / 2} = 1`.
    pub c_eps_x0: Option<f64>,
    /// Biot–Savart normalization `γ₀² var_K` of the vector exponent.
    pub c_eps_bs: Option<f64>,
    /// `Σ |K_ε(y)|² dx^d` of the vector exponent kernel.
    pub var_kvec: Option<f64>,
}

/// Precomputed kernels and spectra for one parameter set on one lattice.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    pub params: FieldParams,
    pub lattice: Lattice,
    pub profile: Mollifier,
    fft: FftNd,
    /// Displacement kernel components on the grid.
    f_sp: Vec<Vec<f64>>,
    /// Spectra of component pairs `F^{2m} + i F^{2m+1}`.
    f_hat: Vec<Vec<Complex64>>,
    /// Scalar exponent kernel on the grid and its spectrum.
    k_sp: Vec<f64>,
    k_hat: Vec<Complex64>,
    /// Spectral Biot–Savart kernel `i ξ Ĝ` and vector exponent kernel `i ξ P̂`.
    bs_f_hat: Vec<Vec<Complex64>>,
    bs_k_hat: Vec<Vec<Complex64>>,
    pub constants: LatticeConstants,
    /// `γ₀* C₀ e^{-γ₁² C₁ / 2} / R^{d/2}`, filled for the auxiliary pair.
    pub cconst: Option<f64>,
}

/// What a synthesizer must be able to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Needs {
    pub displacement: bool,
    pub exponent: bool,
    pub biot_savart: bool,
    pub aux: bool,
}

impl Needs {
    pub fn for_kind(kind: FieldKind) -> Self {
        match kind {
            FieldKind::GaussianBase => Needs { displacement: true, ..Default::default() },
            FieldKind::ChaosMeasure => Needs { exponent: true, ..Default::default() },
            FieldKind::XFamily | FieldKind::X0Family => Needs { displacement: true, exponent: true, ..Default::default() },
            FieldKind::AuxY | FieldKind::AuxZ => Needs { displacement: true, exponent: true, aux: true, ..Default::default() },
            FieldKind::BiotSavart => Needs { biot_savart: true, ..Default::default() },
        }
    }

    pub fn union(self, o: Needs) -> Self {
        Needs {
            displacement: self.displacement || o.displacement,
            exponent: self.exponent || o.exponent,
            biot_savart: self.biot_savart || o.biot_savart,
            aux: self.aux || o.aux,
        }
    }
}

/// Grid offsets (in cells, minimal image) of every flat index.
fn offsets(lattice: &Lattice) -> Vec<Vec<i64>> {
    let n = lattice.total_per_axis();
    let d = lattice.d;
    (0..lattice.n_cells())
        .map(|mut flat| {
            let mut o = vec![0i64; d];
            for a in (0..d).rev() {
                o[a] = min_image(flat % n, n);
                flat /= n;
            }
            o
        })
        .collect()
}

/// Evaluates a radial function once per distinct squared offset.
fn radial_on_grid(offs: &[Vec<i64>], dx: f64, f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let mut keys: Vec<i64> = offs.iter().map(|o| o.iter().map(|v| v * v).sum()).collect();
    let out_keys = keys.clone();
    keys.sort_unstable();
    keys.dedup();
    let vals: Vec<f64> = keys.par_iter().map(|&k| f((k as f64).sqrt() * dx)).collect();
    let map: HashMap<i64, f64> = keys.into_iter().zip(vals).collect();
    out_keys.iter().map(|k| map[k]).collect()
}

/// Angular frequency of index `i` on an axis, with the Nyquist mode zeroed
/// so that spectral derivatives of real fields stay real.
fn wavenumber(i: usize, n: usize, dx: f64) -> f64 {
    if n % 2 == 0 && i == n / 2 {
        return 0.0;
    }
    2.0 * PI * freq_index(i, n) as f64 / (n as f64 * dx)
}

impl Synthesizer {
    /// Builds kernels for `needs`. Gates of the requested families are
    /// checked by the synthesis calls, not here.
    pub fn new(params: FieldParams, lattice: Lattice, profile: Mollifier, needs: Needs) -> Result<Self> {
        params.basic_validity()?;
        lattice.validate(&params)?;
        let d = params.d;
        let dx = lattice.dx;
        let suite = KernelSuite::new(params, profile);
        let fft = FftNd::new(&lattice.shape());
        let offs = offsets(&lattice);
        let cell = lattice.cell_volume();
        let eps = params.epsilon;
        let hd = d as f64 / 2.0;

        let mut s = Synthesizer {
            params,
            lattice: lattice.clone(),
            profile,
            fft,
            f_sp: Vec::new(),
            f_hat: Vec::new(),
            k_sp: Vec::new(),
            k_hat: Vec::new(),
            bs_f_hat: Vec::new(),
            bs_k_hat: Vec::new(),
            constants: LatticeConstants {
                var_k: 0.0,
                k0: 0.0,
                gamma0_eps: params.gamma0_eps(),
                c_eps_x: 0.0,
                c_eps_x0: None,
                c_eps_bs: None,
                var_kvec: None,
            },
            cconst: None,
        };

        let norm_eps = |r: f64| -> f64 {
            if d == 1 && r >= eps {
                r
            } else {
                suite.norm_eps_direct(r, eps)
            }
        };
        let pw = d as f64 - params.alpha + 1.0;
        let f_radial = |r: f64| -> f64 {
            if r == 0.0 || r >= 2.0 * params.r {
                0.0
            } else {
                suite.phi_r(r) / norm_eps(r).powf(pw)
            }
        };

        if needs.displacement {
            let fr = radial_on_grid(&offs, dx, f_radial);
            s.f_sp = (0..d)
                .map(|j| offs.iter().zip(&fr).map(|(o, v)| o[j] as f64 * dx * v).collect())
                .collect();
            s.f_hat = s.pack_spectra(&s.f_sp);
        }

        if needs.exponent {
            let rr = params.r;
            let e = eps / rr;
            let scale = rr.powf(-hd);
            s.k_sp = radial_on_grid(&offs, dx, |r| scale * suite.k_eps_unit_direct(r / rr, e));
            s.k_hat = s.spectrum(&s.k_sp);
            let var: f64 = s.k_sp.iter().map(|v| v * v).sum::<f64>() * cell;
            s.constants.var_k = var;
            s.constants.k0 = s.k_sp[0];
            let g0e = s.constants.gamma0_eps;
            s.constants.c_eps_x = (g0e * g0e + params.gamma1 * params.gamma1) * var;
            if params.gamma0 > 0.0 {
                s.constants.c_eps_x0 = Some((params.gamma0 * s.k_sp[0]).ln() + 0.5 * params.gamma0 * params.gamma0 * var);
            }
        }

        if needs.aux {
            let (c1, _, _) = estimate_c1(&suite)?;
            s.cconst = Some(
                params.gamma0_star * suite.c0() * (-0.5 * params.gamma1 * params.gamma1 * c1).exp() / params.r.powf(hd),
            );
        }

        if needs.biot_savart {
            if d != 3 {
                return Err(Error::DimensionUnsupported(d));
            }
            s.build_biot_savart(&suite, &offs, &f_radial)?;
        }
        Ok(s)
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut c);
        c
    }

    fn pack_spectra(&self, comps: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
        comps
            .chunks(2)
            .map(|pair| {
                let mut c: Vec<Complex64> = if pair.len() == 2 {
                    pair[0].iter().zip(&pair[1]).map(|(&a, &b)| Complex64::new(a, b)).collect()
                } else {
                    pair[0].iter().map(|&a| Complex64::new(a, 0.0)).collect()
                };
                self.fft.forward(&mut c);
                c
            })
            .collect()
    }

    /// Spectral Biot–Savart kernels: the displacement kernel is the
    /// gradient of the radial potential `G(r) = -∫_r^{2R} s f(s) ds`, and
    /// the vector exponent kernel the gradient of the mollified potential of
    /// `x/|x|^{5/2} 1_{|x|<=R}`. Taking both gradients spectrally makes the
    /// field divergence-free to round-off.
    fn build_biot_savart(&mut self, suite: &KernelSuite, offs: &[Vec<i64>], f_radial: &(dyn Fn(f64) -> f64 + Sync)) -> Result<()> {
        let p = self.params;
        let dx = self.lattice.dx;
        let n = self.lattice.total_per_axis();
        let cell = self.lattice.cell_volume();
        let two_r = 2.0 * p.r;
        let opts = QuadOpts::rel(1e-11);

        // cumulative inward integration between consecutive distinct radii
        let mut keys: Vec<i64> = offs.iter().map(|o| o.iter().map(|v| v * v).sum()).collect();
        keys.sort_unstable();
        keys.dedup();
        let radii: Vec<f64> = keys.iter().map(|&k| (k as f64).sqrt() * dx).collect();
        let pieces: Vec<f64> = (0..radii.len())
            .into_par_iter()
            .map(|i| {
                let a = radii[i].max(1e-300);
                let b = if i + 1 < radii.len() { radii[i + 1].min(two_r) } else { two_r };
                if a >= b {
                    0.0
                } else {
                    integrate(|s: f64| s * f_radial(s), a, b, &[p.epsilon, p.r], opts).value
                }
            })
            .collect();
        let mut g_of = vec![0.0; radii.len()];
        let mut acc = 0.0;
        for i in (0..radii.len()).rev() {
            acc -= pieces[i];
            g_of[i] = acc;
        }
        let g_map: HashMap<i64, f64> = keys.iter().copied().zip(g_of).collect();
        // the origin value is irrelevant for the gradient except through the
        // mean mode, which the gradient removes
        let g_sp: Vec<f64> = offs.iter().map(|o| g_map[&o.iter().map(|v| v * v).sum::<i64>()]).collect();
        let g_hat = self.spectrum(&g_sp);

        // scalar potential of the vector exponent kernel, mollified
        let rr = p.r;
        let pot = move |t: f64| if t < rr { -2.0 * (1.0 / t.sqrt() - 1.0 / rr.sqrt()) } else { 0.0 };
        let pot_anti = move |t: f64| {
            let t = t.min(rr);
            -2.0 * (2.0 / 3.0 * t.powf(1.5) - t * t / (2.0 * rr.sqrt()))
        };
        let eps = p.epsilon;
        let th = |s: f64| suite.theta_eps(s, eps);
        let p_sp = radial_on_grid(offs, dx, |r| {
            let f = Radial::new(&th, eps, vec![]);
            let g = Radial::new(&pot, rr, vec![0.0]).with_antideriv(&pot_anti);
            radial_conv(3, &f, &g, r, QuadOpts::rel(1e-11)).value
        });
        let p_hat = self.spectrum(&p_sp);

        let mut bs_f = vec![vec![Complex64::default(); self.fft.len()]; 3];
        let mut bs_k = vec![vec![Complex64::default(); self.fft.len()]; 3];
        for flat in 0..self.fft.len() {
            let idx = [flat / (n * n), (flat / n) % n, flat % n];
            for j in 0..3 {
                let kj = wavenumber(idx[j], n, dx);
                bs_f[j][flat] = Complex64::new(0.0, kj) * g_hat[flat];
                bs_k[j][flat] = Complex64::new(0.0, kj) * p_hat[flat];
            }
        }
        // variance of the exponent from the spatial vector kernel (Parseval)
        let total: f64 = bs_k.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum();
        let var = total / self.fft.len() as f64 * cell;
        self.constants.var_kvec = Some(var);
        self.constants.c_eps_bs = Some(p.gamma0 * p.gamma0 * var);
        self.bs_f_hat = bs_f;
        self.bs_k_hat = bs_k;
        Ok(())
    }

    /// Real input convolved with a real kernel given by its spectrum.
    fn conv(&self, input: &[f64], k_hat: &[Complex64]) -> Vec<f64> {
        let mut c: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut c);
        for (a, b) in c.iter_mut().zip(k_hat) {
            *a *= b;
        }
        self.fft.inverse(&mut c);
        c.into_iter().map(|v| v.re).collect()
    }

    /// Convolutions of one real input with every displacement component.
    fn conv_displacement(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut x: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut x);
        let d = self.params.d;
        let mut out = Vec::with_capacity(d);
        for (m, kh) in self.f_hat.iter().enumerate() {
            let mut c: Vec<Complex64> = x.iter().zip(kh).map(|(a, b)| a * b).collect();
            self.fft.inverse(&mut c);
            out.push(c.iter().map(|v| v.re).collect());
            if 2 * m + 1 < d {
                out.push(c.iter().map(|v| v.im).collect());
            }
        }
        out
    }

    fn window(&self, full: &[f64]) -> Vec<f64> {
        if self.lattice.boundary == Boundary::Periodic {
            return full.to_vec();
        }
        self.lattice.window_indices().into_iter().map(|i| full[i]).collect()
    }

    fn realization(&self, kind: FieldKind, full: Vec<Vec<f64>>, noise: &NoiseDraw) -> FieldRealization {
        FieldRealization {
            kind,
            values: full.iter().map(|c| self.window(c)).collect(),
            params: self.params,
            lattice: self.lattice.clone(),
            noise_seed: noise.seed,
            realization: noise.realization,
        }
    }

    fn require(&self, ok: bool, what: &'static str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::TableNotBuilt(what))
        }
    }

    fn check_noise(&self, noise: &NoiseDraw, ch: Channels) -> Result<()> {
        let n = self.lattice.n_cells();
        let bad = (ch.w0 && noise.w0.len() != n)
            || (ch.w1 && noise.w1.len() != n)
            || (ch.w_vec && (noise.w_vec.len() != 3 || noise.w_vec.iter().any(|w| w.len() != n)));
        if bad {
            return Err(Error::Config("noise draw does not match the lattice or lacks a channel".into()));
        }
        Ok(())
    }

    /// `X_g = F * w0`.
    pub fn gaussian_base(&self, noise: &NoiseDraw) -> Result<FieldRealization> {
        self.gate_base()?;
        self.require(!self.f_hat.is_empty(), "displacement kernel")?;
        self.check_noise(noise, FieldKind::GaussianBase.channels())?;
        let full = self.conv_displacement(&noise.w0);
        Ok(self.realization(FieldKind::GaussianBase, full, noise))
    }

    /// Chaos density `e^{γ X₁ - γ² var/2}` with `X₁ = k_ε * w1`.
    pub fn chaos(&self, noise: &NoiseDraw, gamma: f64) -> Result<FieldRealization> {
        self.gate_chaos(gamma)?;
        self.require(!self.k_hat.is_empty(), "exponent kernel")?;
        self.check_noise(noise, FieldKind::ChaosMeasure.channels())?;
        let x1 = self.conv(&noise.w1, &self.k_hat);
        let c = 0.5 * gamma * gamma * self.constants.var_k;
        let dens: Vec<f64> = x1.iter().map(|v| (gamma * v - c).exp()).collect();
        Ok(self.realization(FieldKind::ChaosMeasure, vec![dens], noise))
    }

    fn x_exponent(&self, noise: &NoiseDraw) -> Vec<f64> {
        let g0e = self.constants.gamma0_eps;
        let g1 = self.params.gamma1;
        let a: Vec<f64> = noise.w0.iter().zip(&noise.w1).map(|(a, b)| g0e * a + g1 * b).collect();
        self.conv(&a, &self.k_hat)
    }

    /// `X_ε = F * (e^{X^ε - C_ε} w0)` with `X^ε = k_ε * (γ₀(ε) w0 + γ₁ w1)`.
    pub fn x_family(&self, noise: &NoiseDraw) -> Result<FieldRealization> {
        self.params.check_x_family()?;
        self.require(!self.f_hat.is_empty() && !self.k_hat.is_empty(), "X family kernels")?;
        self.check_noise(noise, FieldKind::XFamily.channels())?;
        let x = self.x_exponent(noise);
        let c = self.constants.c_eps_x;
        let integrand: Vec<f64> = x.iter().zip(&noise.w0).map(|(x, w)| (x - c).exp() * w).collect();
        let full = self.conv_displacement(&integrand);
        Ok(self.realization(FieldKind::XFamily, full, noise))
    }

    /// `Y_ε = F * Q^{ε,γ₁}` and `Z_ε = F * (e^{γ₁X₁ - C_ε} w0)` on one draw.
    pub fn aux_decomposition(&self, noise: &NoiseDraw) -> Result<(FieldRealization, FieldRealization)> {
        self.params.check_x_family()?;
        self.require(!self.f_hat.is_empty() && !self.k_hat.is_empty(), "X family kernels")?;
        self.check_noise(noise, FieldKind::AuxY.channels())?;
        let g1 = self.params.gamma1;
        let x1 = self.conv(&noise.w1, &self.k_hat);
        let cell = self.lattice.cell_volume();
        let half = 0.5 * g1 * g1 * self.constants.var_k;
        let c = self.constants.c_eps_x;
        let q: Vec<f64> = x1.iter().map(|v| (g1 * v - half).exp() * cell).collect();
        let z_in: Vec<f64> = x1.iter().zip(&noise.w0).map(|(v, w)| (g1 * v - c).exp() * w).collect();
        let y = self.conv_displacement(&q);
        let z = self.conv_displacement(&z_in);
        Ok((self.realization(FieldKind::AuxY, y, noise), self.realization(FieldKind::AuxZ, z, noise)))
    }

    /// `X₀,ε = F * (e^{γ₀ k_ε * w0 - C_ε} w0)` with the X₀ normalization.
    pub fn x0_family(&self, noise: &NoiseDraw) -> Result<FieldRealization> {
        self.params.check_x0_family()?;
        self.gate_x0()?;
        self.require(!self.f_hat.is_empty() && !self.k_hat.is_empty(), "X0 family kernels")?;
        self.check_noise(noise, FieldKind::X0Family.channels())?;
        let g0 = self.params.gamma0;
        let x = self.conv(&noise.w0, &self.k_hat);
        let c = self.constants.c_eps_x0.ok_or_else(|| Error::ParameterGateViolated("γ₀ > 0".into()))?;
        let integrand: Vec<f64> = x.iter().zip(&noise.w0).map(|(x, w)| (g0 * x - c).exp() * w).collect();
        let full = self.conv_displacement(&integrand);
        Ok(self.realization(FieldKind::X0Family, full, noise))
    }

    /// `U^ε = F ∧ (e^{X^ε - C_ε} w)` with `X^ε = γ₀ Σ_j K^j_ε * w_j`.
    pub fn biot_savart(&self, noise: &NoiseDraw) -> Result<FieldRealization> {
        if self.params.d != 3 {
            return Err(Error::DimensionUnsupported(self.params.d));
        }
        self.require(!self.bs_f_hat.is_empty(), "Biot–Savart kernels")?;
        self.check_noise(noise, FieldKind::BiotSavart.channels())?;
        let g = self.params.gamma0;
        let len = self.fft.len();
        let w_hat: Vec<Vec<Complex64>> = noise.w_vec.iter().map(|w| self.spectrum(w)).collect();
        // exponent: one complex inverse transform of the summed spectrum
        let mut xh = vec![Complex64::default(); len];
        for j in 0..3 {
            for i in 0..len {
                xh[i] += self.bs_k_hat[j][i] * w_hat[j][i];
            }
        }
        self.fft.inverse(&mut xh);
        let c = self.constants.c_eps_bs.unwrap_or(0.0);
        let dens: Vec<f64> = xh.iter().map(|v| (g * v.re - c).exp()).collect();
        let om_hat: Vec<Vec<Complex64>> = noise
            .w_vec
            .iter()
            .map(|w| self.spectrum(&w.iter().zip(&dens).map(|(a, b)| a * b).collect::<Vec<_>>()))
            .collect();
        let f = &self.bs_f_hat;
        let mut out = Vec::with_capacity(3);
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let mut u: Vec<Complex64> = (0..len).map(|i| f[a][i] * om_hat[b][i] - f[b][i] * om_hat[a][i]).collect();
            self.fft.inverse(&mut u);
            out.push(u.iter().map(|v| v.re).collect());
        }
        Ok(self.realization(FieldKind::BiotSavart, out, noise))
    }

    /// Dispatches on `kind`; the auxiliary kinds return their own member of
    /// the pair.
    pub fn synthesize(&self, kind: FieldKind, noise: &NoiseDraw) -> Result<FieldRealization> {
        match kind {
            FieldKind::GaussianBase => self.gaussian_base(noise),
            FieldKind::ChaosMeasure => self.chaos(noise, self.params.gamma1),
            FieldKind::XFamily => self.x_family(noise),
            FieldKind::X0Family => self.x0_family(noise),
            FieldKind::BiotSavart => self.biot_savart(noise),
            FieldKind::AuxY => Ok(self.aux_decomposition(noise)?.0),
            FieldKind::AuxZ => Ok(self.aux_decomposition(noise)?.1),
        }
    }

    /// Runs `per` on realizations `0..n` of `kind` drawn from `seed`, in a
    /// pool of `workers` threads. Results come back in realization order and
    /// do not depend on the worker count.
    pub fn batch<T, F>(&self, kind: FieldKind, seed: u64, n: usize, workers: usize, per: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(FieldRealization) -> Result<T> + Sync,
    {
        let ch = kind.channels();
        let job = |r: usize| -> Result<T> {
            let noise = NoiseDraw::sample(&self.lattice, seed, r as u64, ch);
            per(self.synthesize(kind, &noise)?)
        };
        run_indexed(n, workers, job)
    }

    /// Explicit-sum evaluation of the same lattice field; `O(window × cells)`
    /// work, for verification on small lattices. The Biot–Savart kernels are
    /// first brought back to real space.
    pub fn synthesize_direct(&self, kind: FieldKind, noise: &NoiseDraw) -> Result<FieldRealization> {
        let cell = self.lattice.cell_volume();
        let n = self.lattice.n_cells();
        let all: Vec<usize> = (0..n).collect();
        let win: Vec<usize> = if self.lattice.boundary == Boundary::Periodic { all.clone() } else { self.lattice.window_indices() };
        let f_comps = |input: &[f64]| -> Vec<Vec<f64>> {
            (0..self.params.d).map(|j| self.direct_conv(input, &self.f_sp[j], &win)).collect()
        };
        let full_of = |vals: Vec<Vec<f64>>| -> FieldRealization {
            FieldRealization {
                kind,
                values: vals,
                params: self.params,
                lattice: self.lattice.clone(),
                noise_seed: noise.seed,
                realization: noise.realization,
            }
        };
        match kind {
            FieldKind::GaussianBase => {
                self.gate_base()?;
                Ok(full_of(f_comps(&noise.w0)))
            }
            FieldKind::ChaosMeasure => {
                let g = self.params.gamma1;
                self.gate_chaos(g)?;
                let x1 = self.direct_conv(&noise.w1, &self.k_sp, &win);
                let c = 0.5 * g * g * self.constants.var_k;
                Ok(full_of(vec![x1.iter().map(|v| (g * v - c).exp()).collect()]))
            }
            FieldKind::XFamily => {
                self.params.check_x_family()?;
                let g0e = self.constants.gamma0_eps;
                let a: Vec<f64> = noise.w0.iter().zip(&noise.w1).map(|(a, b)| g0e * a + self.params.gamma1 * b).collect();
                let x = self.direct_conv(&a, &self.k_sp, &all);
                let c = self.constants.c_eps_x;
                let integ: Vec<f64> = x.iter().zip(&noise.w0).map(|(x, w)| (x - c).exp() * w).collect();
                Ok(full_of(f_comps(&integ)))
            }
            FieldKind::X0Family => {
                self.params.check_x0_family()?;
                let x = self.direct_conv(&noise.w0, &self.k_sp, &all);
                let c = self.constants.c_eps_x0.unwrap_or(0.0);
                let g0 = self.params.gamma0;
                let integ: Vec<f64> = x.iter().zip(&noise.w0).map(|(x, w)| (g0 * x - c).exp() * w).collect();
                Ok(full_of(f_comps(&integ)))
            }
            FieldKind::AuxY | FieldKind::AuxZ => {
                self.params.check_x_family()?;
                let g1 = self.params.gamma1;
                let x1 = self.direct_conv(&noise.w1, &self.k_sp, &all);
                let integ: Vec<f64> = if kind == FieldKind::AuxY {
                    let half = 0.5 * g1 * g1 * self.constants.var_k;
                    x1.iter().map(|v| (g1 * v - half).exp() * cell).collect()
                } else {
                    let c = self.constants.c_eps_x;
                    x1.iter().zip(&noise.w0).map(|(v, w)| (g1 * v - c).exp() * w).collect()
                };
                Ok(full_of(f_comps(&integ)))
            }
            FieldKind::BiotSavart => {
                let back = |h: &Vec<Complex64>| -> Vec<f64> {
                    let mut c = h.clone();
                    self.fft.inverse(&mut c);
                    c.iter().map(|v| v.re).collect()
                };
                let fs: Vec<Vec<f64>> = self.bs_f_hat.iter().map(back).collect();
                let ks: Vec<Vec<f64>> = self.bs_k_hat.iter().map(back).collect();
                let mut x = vec![0.0; n];
                for j in 0..3 {
                    let part = self.direct_conv(&noise.w_vec[j], &ks[j], &all);
                    for (a, b) in x.iter_mut().zip(part) {
                        *a += b;
                    }
                }
                let g = self.params.gamma0;
                let c = self.constants.c_eps_bs.unwrap_or(0.0);
                let om: Vec<Vec<f64>> = (0..3)
                    .map(|j| noise.w_vec[j].iter().zip(&x).map(|(w, x)| w * (g * x - c).exp()).collect())
                    .collect();
                let mut out = Vec::with_capacity(3);
                for j in 0..3 {
                    let (a, b) = ((j + 1) % 3, (j + 2) % 3);
                    let p = self.direct_conv(&om[b], &fs[a], &win);
                    let q = self.direct_conv(&om[a], &fs[b], &win);
                    out.push(p.iter().zip(q).map(|(p, q)| p - q).collect());
                }
                Ok(full_of(out))
            }
        }
    }

    /// `out[i] = Σ_y ker(x_i - y) input(y)` with periodic indexing on the grid.
    fn direct_conv(&self, input: &[f64], ker: &[f64], targets: &[usize]) -> Vec<f64> {
        let n = self.lattice.total_per_axis();
        let d = self.params.d;
        let coords: Vec<usize> = (0..input.len())
            .flat_map(|mut f| {
                let mut v = vec![0; d];
                for a in (0..d).rev() {
                    v[a] = f % n;
                    f /= n;
                }
                v
            })
            .collect();
        targets
            .par_iter()
            .map(|&t| {
                let ti = &coords[t * d..(t + 1) * d];
                let mut acc = 0.0;
                for (y, &w) in input.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let yi = &coords[y * d..(y + 1) * d];
                    let mut off = 0;
                    for a in 0..d {
                        off = off * n + (ti[a] + n - yi[a]) % n;
                    }
                    acc += ker[off] * w;
                }
                acc
            })
            .collect()
    }

    fn gate_base(&self) -> Result<()> {
        let h = self.params.d as f64 / 2.0;
        if !(self.params.alpha > h && self.params.alpha < h + 1.0) {
            return Err(Error::ParameterGateViolated(format!("d/2 < α < d/2+1 fails: α = {}", self.params.alpha)));
        }
        Ok(())
    }

    fn gate_chaos(&self, gamma: f64) -> Result<()> {
        if !(gamma * gamma * omega_d(self.params.d) < self.params.d as f64) {
            return Err(Error::ParameterGateViolated("γ²ω_d < d".into()));
        }
        Ok(())
    }

    fn gate_x0(&self) -> Result<()> {
        if !(self.params.lambda0() < self.params.alpha) {
            return Err(Error::ParameterGateViolated("γ₀²ω_d < α".into()));
        }
        Ok(())
    }

    /// Spatial displacement kernel components (grid order).
    pub fn displacement_kernel(&self) -> &[Vec<f64>] {
        &self.f_sp
    }

    /// Spatial scalar exponent kernel (grid order).
    pub fn exponent_kernel(&self) -> &[f64] {
        &self.k_sp
    }

    pub fn fft(&self) -> &FftNd {
        &self.fft
    }
}

/// Maps `job` over `0..n` on `workers` threads, preserving index order.
pub fn run_indexed<T, F>(n: usize, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if workers <= 1 {
        return (0..n).map(&job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&job).collect())
}

/// Deterministic integral `∫ |F_R(y)|² dy` of the unmollified kernel, the
/// continuum pointwise variance of every component sum.
pub fn base_variance_oracle(params: &FieldParams) -> f64 {
    let d = params.d;
    let p = 2.0 * (d as f64 - params.alpha + 1.0) - 2.0;
    let r = params.r;
    let amp = r.powf(d as f64 - 2.0 * params.alpha);
    // |F|² = φ_R² r² / r^{2(d-α+1)}; radial integral over the shell
    let q = integrate(
        |s: f64| cutoff(s / r).powi(2) * s.powf(d as f64 - 1.0 - p),
        0.0,
        2.0 * r,
        &[r],
        QuadOpts::rel(1e-12),
    );
    amp * omega_d(d) * q.value
}
