//! Multifractal random vector fields built from log-correlated Gaussian
//! exponents and white noise: lattice synthesis, closed-form moment
//! oracles, structure-function scaling fits and appendix-level checks.

pub mod analytic_moments;
pub mod appendix_coefficients;
pub mod error;
pub mod fft;
pub mod gaussian_oracle;
pub mod kernels;
pub mod lattice;
pub mod quad;
pub mod runner;
pub mod scaling_analysis;
pub mod synthesis;

pub use error::{Error, Result};
pub use kernels::{derive_constants, Constants, FieldParams, KernelSuite, Mollifier};
pub use lattice::{Boundary, Lattice, NoiseDraw};
pub use runner::{RunConfig, RunManifest};
pub use synthesis::{FieldKind, FieldRealization, Synthesizer};
