//! Gaussian stand-in for the enhancement task.
//!
//! Clean coefficients are `X_0 ~ N_C(m0, s0sq)` around a sparse template
//! `m0` (unit magnitude, random phase, on a random subset of cells), the noise
//! is `N ~ N_C(0, snsq)`, and `Y = X_0 + N`. Given `Y` the clean grid is
//! Gaussian with mean `m0 + w (Y - m0)` and variance `w snsq`,
//! `w = s0sq / (s0sq + snsq)`, which the analytic score encodes exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::metrics::{
    external_metric, filtered_components, gain_function, noise_attenuation, speech_quality_proxy,
    MetricAdapter, SEGMENT_LEN,
};
use crate::rng::complex_normal;
use crate::score::{analytic_gaussian_score, GaussianTaskSpec};
use crate::sde::SdeSpec;
use crate::signal::{Stft, StftConfig};
use crate::solvers::{reverse_euler_maruyama, SamplerConfig};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    /// STFT frames per draw; bins follow the default STFT.
    pub frames: usize,
    pub amplitude: f64,
    pub active_fraction: f64,
    pub s0sq: f64,
    pub snsq: f64,
    /// Independent draws averaged into one report row.
    pub draws: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            frames: 16,
            amplitude: 1.0,
            active_fraction: 0.3,
            s0sq: 1.0,
            snsq: 1.0,
            draws: 8,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        let stft = StftConfig::default();
        if self.frames < 2 || self.length() < stft.window_size {
            return Err(Error::InvalidSpec(format!(
                "toy needs at least {} frames",
                stft.window_size / stft.hop + 2
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidSpec(
                "toy amplitude must be nonnegative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.active_fraction) {
            return Err(Error::InvalidSpec(
                "active_fraction must lie in [0, 1]".into(),
            ));
        }
        if !(self.s0sq > 0.0 && self.snsq > 0.0 && self.s0sq.is_finite() && self.snsq.is_finite()) {
            return Err(Error::InvalidSpec("toy variances must be positive".into()));
        }
        if self.draws == 0 {
            return Err(Error::InvalidSpec("draws must be at least 1".into()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        StftConfig::default().bins()
    }

    /// Waveform length whose STFT has exactly `frames` frames.
    pub fn length(&self) -> usize {
        (self.frames - 1) * StftConfig::default().hop
    }

    pub fn posterior_weight(&self) -> f64 {
        self.s0sq / (self.s0sq + self.snsq)
    }

    pub fn posterior_var(&self) -> f64 {
        self.posterior_weight() * self.snsq
    }
}

/// One realisation of the toy task.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDraw {
    pub x0: ComplexGrid,
    pub noise: ComplexGrid,
    pub y: ComplexGrid,
    pub post_mean: ComplexGrid,
    pub post_var: f64,
}

impl ToyDraw {
    /// Task whose analytic score is the exact conditional score given `y`.
    pub fn score_task(&self, spec: SdeSpec) -> Result<GaussianTaskSpec> {
        GaussianTaskSpec::new(self.post_mean.clone(), self.post_var, spec)
    }
}

pub fn draw_toy<R: Rng + ?Sized>(cfg: &ToyConfig, rng: &mut R) -> Result<ToyDraw> {
    let (bins, frames) = (cfg.bins(), cfg.frames);
    let d = bins * frames;
    let mut m0 = Vec::with_capacity(d);
    for _ in 0..d {
        let active = rng.random::<f64>() < cfg.active_fraction;
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        m0.push(if active {
            Complex64::from_polar(cfg.amplitude, phase)
        } else {
            Complex64::new(0.0, 0.0)
        });
    }
    let (s0, sn) = (cfg.s0sq.sqrt(), cfg.snsq.sqrt());
    let x0: Vec<Complex64> = m0.iter().map(|&m| m + complex_normal(rng) * s0).collect();
    let noise: Vec<Complex64> = (0..d).map(|_| complex_normal(rng) * sn).collect();
    let w = cfg.posterior_weight();
    let y: Vec<Complex64> = x0.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let post_mean: Vec<Complex64> = m0
        .iter()
        .zip(&y)
        .map(|(&m, &yv)| m + (yv - m) * w)
        .collect();
    Ok(ToyDraw {
        x0: ComplexGrid::from_vec(bins, frames, x0)?,
        noise: ComplexGrid::from_vec(bins, frames, noise)?,
        y: ComplexGrid::from_vec(bins, frames, y)?,
        post_mean: ComplexGrid::from_vec(bins, frames, post_mean)?,
        post_var: cfg.posterior_var(),
    })
}

/// Metrics of one reverse solve on one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyOutcome {
    pub na_db: f64,
    pub proxy_db: f64,
    /// `||X_hat - E[X_0 | Y]||_2`.
    pub residual: f64,
    /// Root mean square of the same difference per coefficient.
    pub residual_rms: f64,
    pub prior_mismatch: f64,
    pub external: Option<f64>,
}

/// Enhances `draw.y` with the exact score and scores the estimate through
/// the gain-function decomposition.
pub fn evaluate_toy_draw<R: Rng + ?Sized>(
    spec: &SdeSpec,
    sampler: &SamplerConfig,
    draw: &ToyDraw,
    length: usize,
    stft: &Stft,
    adapter: Option<&MetricAdapter>,
    rng: &mut R,
) -> Result<ToyOutcome> {
    let score = analytic_gaussian_score(draw.score_task(*spec)?);
    let x_hat = reverse_euler_maruyama(spec, &draw.y, &score, sampler, rng)?;
    let diff = x_hat.lin_comb(1.0, &draw.post_mean, -1.0)?;
    let residual = diff.norm();

    let gain = gain_function(&x_hat, &draw.y)?;
    let parts = filtered_components(&gain, &draw.x0, &draw.y, stft.config(), length)?;
    let n = stft.synthesize(&draw.noise, length)?;
    let s = stft.synthesize(&draw.x0, length)?;
    let na_db = noise_attenuation(&n, &parts.n_tilde, SEGMENT_LEN)?;
    let proxy_db = speech_quality_proxy(&parts.s_tilde, &s)?;
    let external = match adapter {
        Some(a) => Some(external_metric(a, &s, &stft.synthesize(&x_hat, length)?)?),
        None => None,
    };
    Ok(ToyOutcome {
        na_db,
        proxy_db,
        residual,
        residual_rms: residual / (diff.len() as f64).sqrt(),
        prior_mismatch: spec.prior_mismatch_at(&draw.x0, &draw.y, sampler.t_rsp)?,
        external,
    })
}
