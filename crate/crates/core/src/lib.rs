//! Forward and reverse SDE machinery for diffusion-based speech enhancement,
//! with the signal processing and metrics needed to study the diffusion
//! coefficient of the forward process.

pub mod error;
pub mod experiments;
pub mod grid;
pub mod metrics;
pub mod rng;
pub mod score;
pub mod sde;
pub mod signal;
pub mod solvers;
pub mod special_fns;

pub use error::{Error, Result};
pub use grid::ComplexGrid;
pub use num_complex::Complex64;
pub use rng::RandomSource;
pub use score::{analytic_gaussian_score, AnalyticGaussianScore, GaussianTaskSpec, ScoreFunction};
pub use sde::{DiffusionState, KernelMoments, SdeKind, SdeSpec};
pub use signal::{CompressionConfig, StftConfig, Waveform};
pub use solvers::{KernelStats, SamplerConfig, Trajectory};
pub use special_fns::expint_ei;
