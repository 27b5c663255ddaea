//! Experiment driver: configuration, gate validation, orchestration,
//! persistence and reproduction checks.

pub mod config;
pub mod experiments;
pub mod gates;

pub use config::{AnalysisOptions, Experiment, LatticeSpec, RunConfig};
pub use experiments::{analysis_lags, analysis_window, Check, Outcome};
pub use gates::{four_fifths_incompatibility, validate_gates, Gate, GateReport};

use crate::analytic_moments::{
    chaos_moment, moment_table_csv, x0_moment, x_moment_even, EvalOptions, Integrand, MomentRow, MomentSpec,
};
use crate::error::Error;
use crate::kernels::{derive_constants, Constants, KernelSuite, Mollifier};
use crate::synthesis::{FieldKind, LatticeConstants, Needs, Synthesizer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Failure of a run, with the stage that raised it.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(Error),
    #[error("gate check failed: {}", .0.failures().iter().map(|g| format!("{} (slack {:+.4})", g.inequality, g.slack)).collect::<Vec<_>>().join("; "))]
    Gates(Box<GateReport>),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: Error },
}

impl RunError {
    /// True for errors in the configuration or its gates, as opposed to
    /// failures during compute.
    pub fn is_config(&self) -> bool {
        match self {
            RunError::Config(_) | RunError::Gates(_) => true,
            RunError::Stage { source, .. } => matches!(
                source,
                Error::Config(_)
                    | Error::ParameterGateViolated(_)
                    | Error::GateViolated(_)
                    | Error::IntegrabilityGateViolated(_)
                    | Error::LatticeUnderResolved { .. }
                    | Error::DimensionUnsupported(_)
                    | Error::LagUnresolvable(_)
                    | Error::WindowTooSmall(_)
            ),
        }
    }
}

/// One written file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl Artifact {
    fn of(name: &str, data: &[u8]) -> Self {
        Artifact { name: name.to_string(), sha256: hex::encode(Sha256::digest(data)), bytes: data.len() as u64 }
    }
}

/// Everything needed to audit and reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    /// Continuum constants `C₀`, `C₁`, `C_ε`, `C`.
    pub constants: Option<Constants>,
    /// Normalizations of the lattice fields actually sampled.
    pub lattice_constants: Option<LatticeConstants>,
    pub gates: GateReport,
    pub checks: Vec<Check>,
    pub summary: serde_json::Value,
    pub wall_clock_s: f64,
    pub counters: BTreeMap<String, u64>,
    /// Data files in write order; the manifest itself is not listed.
    pub artifacts: Vec<Artifact>,
    pub pass: bool,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(e.into()))?;
        serde_json::from_str(&text).map_err(|e| RunError::Config(Error::Config(format!("manifest: {e}"))))
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Structural validation plus the gate report; stops before any compute.
pub fn preflight(config: &RunConfig) -> Result<GateReport, RunError> {
    config.validate().map_err(RunError::Config)?;
    let report = validate_gates(config);
    if !report.pass {
        return Err(RunError::Gates(Box::new(report)));
    }
    Ok(report)
}

fn write(dir: &Path, name: &str, data: &[u8]) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::Stage { stage: "write", source: e.into() })?;
    std::fs::write(dir.join(name), data).map_err(|e| RunError::Stage { stage: "write", source: e.into() })
}

fn continuum_constants(config: &RunConfig) -> Result<Option<Constants>, RunError> {
    let needs_fields = matches!(
        config.experiment,
        Experiment::BaseScaling
            | Experiment::XScaling
            | Experiment::XSkewness
            | Experiment::X0Scaling
            | Experiment::BiotSavart
            | Experiment::FourFifths
    );
    if !needs_fields {
        return Ok(None);
    }
    let suite = derive_constants(config.params, Mollifier::default())
        .map_err(|source| RunError::Stage { stage: "constants", source })?;
    Ok(suite.constants)
}

/// Validates, runs the experiment, writes every artifact and the manifest
/// into `config.output_dir`.
pub fn run(config: &RunConfig) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let gates = preflight(config)?;
    let constants = continuum_constants(config)?;
    let outcome = experiments::run_experiment(config).map_err(|(stage, source)| RunError::Stage { stage, source })?;
    let dir = &config.output_dir;
    let mut artifacts = Vec::new();
    let mut files = outcome.artifacts;
    let summary_text = serde_json::to_string_pretty(&outcome.summary).unwrap_or_default();
    files.push(("summary.json".into(), summary_text.into_bytes()));
    for (name, data) in &files {
        write(dir, name, data)?;
        artifacts.push(Artifact::of(name, data));
    }
    let pass = outcome.checks.iter().all(|c| c.pass);
    let manifest = RunManifest {
        config: config.clone(),
        constants,
        lattice_constants: outcome.synthesizer.as_ref().map(|s| s.constants),
        gates,
        checks: outcome.checks,
        summary: outcome.summary,
        wall_clock_s: start.elapsed().as_secs_f64(),
        counters: outcome.counters,
        artifacts,
        pass,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RunError::Stage { stage: "write", source: Error::Io(e.to_string()) })?;
    write(dir, MANIFEST_FILE, text.as_bytes())?;
    Ok(manifest)
}

/// Per-artifact comparison of a rerun against a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    /// `(name, expected sha256, actual sha256)`.
    pub artifacts: Vec<(String, String, Option<String>)>,
    pub identical: bool,
    pub rerun: RunManifest,
}

/// Reruns the configuration recorded in `manifest_path` into `out` and
/// compares every artifact hash.
pub fn reproduce(manifest_path: &Path, out: &Path) -> Result<ReproduceReport, RunError> {
    let original = RunManifest::load(manifest_path)?;
    let config = RunConfig { output_dir: out.to_path_buf(), ..original.config.clone() };
    let rerun = run(&config)?;
    let actual: BTreeMap<&str, &str> = rerun.artifacts.iter().map(|a| (a.name.as_str(), a.sha256.as_str())).collect();
    let artifacts: Vec<_> = original
        .artifacts
        .iter()
        .map(|a| (a.name.clone(), a.sha256.clone(), actual.get(a.name.as_str()).map(|s| s.to_string())))
        .collect();
    let identical = artifacts.iter().all(|(_, e, a)| a.as_deref() == Some(e.as_str()))
        && rerun.artifacts.len() == original.artifacts.len();
    Ok(ReproduceReport { artifacts, identical, rerun })
}

/// The field kind an experiment samples.
pub fn field_kind(experiment: Experiment) -> Option<FieldKind> {
    match experiment {
        Experiment::BaseScaling => Some(FieldKind::GaussianBase),
        Experiment::ChaosMoments => Some(FieldKind::ChaosMeasure),
        Experiment::XScaling | Experiment::XSkewness => Some(FieldKind::XFamily),
        Experiment::X0Scaling => Some(FieldKind::X0Family),
        Experiment::BiotSavart => Some(FieldKind::BiotSavart),
        Experiment::FourFifths | Experiment::Appendix | Experiment::Bounds => None,
    }
}

/// Synthesizes `count` realizations of the experiment's field and writes
/// binary dumps with JSON sidecars plus a CSV slice of each.
pub fn synth(config: &RunConfig, count: usize) -> Result<Vec<PathBuf>, RunError> {
    preflight(config)?;
    let kind = field_kind(config.experiment)
        .ok_or_else(|| RunError::Config(Error::Config(format!("{} samples no field", config.experiment.name()))))?;
    let lattice = config.lattice.build(&config.params);
    let s = Synthesizer::new(config.params, lattice, Mollifier::default(), Needs::for_kind(kind))
        .map_err(|source| RunError::Stage { stage: "setup", source })?;
    let dir = config.output_dir.clone();
    let paths = s
        .batch(kind, config.seed, count, config.workers, |f| {
            let stem = format!("field_{:06}", f.realization);
            let (bin, json) = f.write_dump(&dir, &stem)?;
            std::fs::write(dir.join(format!("{stem}_slice.csv")), f.slice_csv())?;
            Ok(vec![bin, json])
        })
        .map_err(|source| RunError::Stage { stage: "synthesis", source })?;
    Ok(paths.into_iter().flatten().collect())
}

/// Deterministic moment table of the experiment's family at the analysis
/// lags (or the unit box for chaos), written as `moments.csv`.
pub fn moments(config: &RunConfig) -> Result<Vec<MomentRow>, RunError> {
    preflight(config)?;
    let st = |source| RunError::Stage { stage: "moments", source };
    let p = config.params;
    let opts = EvalOptions {
        rel_tol: 1e-5,
        mc_samples: config.analysis.mc_samples,
        seed: config.seed,
        workers: config.workers,
        ..Default::default()
    };
    let suite = match config.experiment {
        Experiment::ChaosMoments => {
            let mut s = KernelSuite::new(p, Mollifier::default());
            s.build_tables();
            s
        }
        _ => derive_constants(p, Mollifier::default()).map_err(st)?,
    };
    let mut rows = Vec::new();
    match config.experiment {
        Experiment::ChaosMoments => {
            let lattice = config.lattice.build(&p);
            let (lo, hi) = (lattice.origin[0], lattice.origin[0] + lattice.n_per_axis as f64 * lattice.dx);
            for g in gates::chaos_gammas(config) {
                for k in 1..=2 {
                    let spec = MomentSpec { mollified: true, ..MomentSpec::chaos(Integrand::BoxIndicator { lo, hi }, k, g) };
                    let estimate = chaos_moment(&suite, &spec, &opts).map_err(st)?;
                    rows.push(MomentRow { spec, estimate });
                }
            }
        }
        Experiment::XScaling | Experiment::XSkewness => {
            let mut halves: Vec<usize> = config.analysis.orders.iter().filter(|&&q| q % 2 == 0).map(|&q| q / 2).collect();
            halves.dedup();
            for lag in analysis_lags(config) {
                for &l in &halves {
                    let spec = MomentSpec { mollified: true, ..MomentSpec::x_even(l, lag_vec(p.d, lag), 0) };
                    let estimate = x_moment_even(&suite, &spec, &opts).map_err(st)?;
                    rows.push(MomentRow { spec, estimate });
                }
            }
        }
        Experiment::X0Scaling => {
            for lag in analysis_lags(config) {
                for &q in &config.analysis.orders {
                    let spec = MomentSpec { mollified: true, ..MomentSpec::x0(q, lag_vec(p.d, lag), 0) };
                    let m = x0_moment(&suite, &spec, &opts).map_err(st)?;
                    rows.push(MomentRow { spec, estimate: m.moment });
                }
            }
        }
        e => return Err(RunError::Config(Error::Config(format!("{} has no moment table", e.name())))),
    }
    write(&config.output_dir, "moments.csv", moment_table_csv(&rows).as_bytes())?;
    Ok(rows)
}

fn lag_vec(d: usize, lag: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = lag;
    v
}
