//! Run configuration and the per-experiment presets.

use crate::error::{Error, Result};
use crate::kernels::FieldParams;
use crate::lattice::{Boundary, Lattice};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// The experiments the runner knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    BaseScaling,
    ChaosMoments,
    XScaling,
    XSkewness,
    X0Scaling,
    FourFifths,
    BiotSavart,
    Appendix,
    Bounds,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::BaseScaling,
        Experiment::ChaosMoments,
        Experiment::XScaling,
        Experiment::XSkewness,
        Experiment::X0Scaling,
        Experiment::FourFifths,
        Experiment::BiotSavart,
        Experiment::Appendix,
        Experiment::Bounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::BaseScaling => "base_scaling",
            Experiment::ChaosMoments => "chaos_moments",
            Experiment::XScaling => "x_scaling",
            Experiment::XSkewness => "x_skewness",
            Experiment::X0Scaling => "x0_scaling",
            Experiment::FourFifths => "four_fifths",
            Experiment::BiotSavart => "biot_savart",
            Experiment::Appendix => "appendix",
            Experiment::Bounds => "bounds",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Lattice descriptor; the halo of padded lattices follows from `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    /// Cells per axis in the physical window.
    pub n_per_axis: usize,
    pub dx: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_boundary() -> Boundary {
    Boundary::Padded
}

impl LatticeSpec {
    pub fn build(&self, params: &FieldParams) -> Lattice {
        match self.boundary {
            Boundary::Padded => Lattice::padded(params.d, self.n_per_axis, self.dx, params.r),
            Boundary::Periodic => Lattice::periodic(params.d, self.n_per_axis, self.dx),
        }
    }
}

/// Analysis knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    /// Structure-function orders.
    pub orders: Vec<usize>,
    /// Closed fit window `[lo, hi]`; defaults to `(4ε, R/2)`.
    pub fit_window: Option<[f64; 2]>,
    /// Lags per octave of the lag ladder.
    pub per_octave: usize,
    /// Intermittency `μ = 4πγ₀²` of the four-fifths calibration.
    pub mu: f64,
    /// Regularity exponents of the appendix suite.
    pub alphas: Vec<f64>,
    /// Exponents `δ` of the bound suite; defaults to `{0, α/2}`.
    pub deltas: Option<Vec<f64>>,
    /// Samples of the Monte-Carlo block integrals.
    pub mc_samples: usize,
    /// γ₁ values of a chaos run; defaults to the parameter's γ₁.
    pub gamma1_sweep: Option<Vec<f64>>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            orders: vec![1, 2, 3, 4],
            fit_window: None,
            per_octave: 4,
            mu: 0.023,
            alphas: vec![0.3, 0.5, 0.7],
            deltas: None,
            mc_samples: 1 << 18,
            gamma1_sweep: None,
        }
    }
}

/// One reproducible run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub params: FieldParams,
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub n_realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Overrides of named check tolerances.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Structural checks that do not depend on the experiment's gates.
    pub fn validate(&self) -> Result<()> {
        if self.params.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if self.lattice.n_per_axis == 0 || !(self.lattice.dx > 0.0) {
            return Err(Error::Config("lattice needs n_per_axis >= 1 and dx > 0".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.analysis.per_octave == 0 {
            return Err(Error::Config("per_octave must be at least 1".into()));
        }
        if let Some([lo, hi]) = self.analysis.fit_window {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::Config("fit_window needs 0 < lo < hi".into()));
            }
        }
        if self.analysis.orders.is_empty() || self.analysis.orders.contains(&0) {
            return Err(Error::Config("orders must be a non-empty list of positive integers".into()));
        }
        Ok(())
    }

    /// Named tolerance, falling back to `default`.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// The reference configuration of every experiment.
    pub fn preset(experiment: Experiment) -> Self {
        let base = |params: FieldParams, lattice: LatticeSpec, n: usize| RunConfig {
            experiment,
            params,
            lattice,
            n_realizations: n,
            seed: 20_240_601,
            output_dir: PathBuf::from("out").join(experiment.name()),
            workers: 1,
            tolerances: BTreeMap::new(),
            analysis: AnalysisOptions::default(),
        };
        let padded = |n: usize, dx: f64| LatticeSpec { n_per_axis: n, dx, boundary: Boundary::Padded };
        match experiment {
            Experiment::BaseScaling => {
                let dx = 1.0 / 32768.0;
                let p = FieldParams { d: 1, r: 1.0, alpha: 0.8, epsilon: 4.0 * dx, ..Default::default() };
                let mut c = base(p, padded(1 << 16, dx), 512);
                c.analysis.fit_window = Some([128.0 * p.epsilon, p.r / 16.0]);
                c
            }
            Experiment::ChaosMoments => {
                let dx = 1.0 / 256.0;
                let g = (0.2f64 / 2.0).sqrt();
                let p = FieldParams { d: 1, r: 1.0, alpha: 0.8, gamma1: g, epsilon: 4.0 * dx, ..Default::default() };
                let mut c = base(p, padded(256, dx), 20_000);
                c.analysis.gamma1_sweep = Some(vec![(0.1f64 / 2.0).sqrt(), g]);
                c
            }
            Experiment::XScaling | Experiment::XSkewness => {
                let dx = 1.0 / 16384.0;
                let g = (0.05f64 / 2.0).sqrt();
                let g0s = if experiment == Experiment::XSkewness { 0.5 } else { 0.0 };
                let p = FieldParams {
                    d: 1,
                    r: 1.0,
                    alpha: 0.8,
                    gamma1: g,
                    gamma0_star: g0s,
                    epsilon: 4.0 * dx,
                    ..Default::default()
                };
                let mut c = base(p, padded(16384, dx), 10_000);
                c.analysis.fit_window = Some([32.0 * p.epsilon, p.r / 16.0]);
                c
            }
            Experiment::X0Scaling => {
                let dx = 1.0 / 4096.0;
                let g0 = (0.1f64 / 2.0).sqrt();
                let p = FieldParams { d: 1, r: 1.0, alpha: 0.5, gamma0: g0, epsilon: 4.0 * dx, ..Default::default() };
                let mut c = base(p, padded(4096, dx), 2000);
                c.analysis.fit_window = Some([32.0 * p.epsilon, p.r / 8.0]);
                c
            }
            Experiment::FourFifths => {
                let mu = AnalysisOptions::default().mu;
                let p = FieldParams {
                    d: 3,
                    r: 1.0,
                    alpha: 1.0 / 3.0 + mu,
                    gamma0: (mu / (4.0 * std::f64::consts::PI)).sqrt(),
                    epsilon: 1.0 / 16.0,
                    ..Default::default()
                };
                base(p, padded(1, 1.0 / 64.0), 0)
            }
            Experiment::BiotSavart => {
                let p = FieldParams { d: 3, r: 6.0, alpha: 0.5, gamma0: 0.1, epsilon: 4.0, ..Default::default() };
                let mut c = base(p, LatticeSpec { n_per_axis: 64, dx: 1.0, boundary: Boundary::Periodic }, 256);
                c.analysis.orders = vec![2, 3];
                c
            }
            Experiment::Appendix => {
                let p = FieldParams { d: 1, alpha: 0.5, ..Default::default() };
                base(p, padded(1, 1.0 / 1024.0), 0)
            }
            Experiment::Bounds => {
                let p = FieldParams { d: 1, r: 1.0, alpha: 0.8, ..Default::default() };
                base(p, padded(1, 1.0 / 1024.0), 0)
            }
        }
    }
}
