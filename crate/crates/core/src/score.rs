//! Score functions and the denoising score-matching objective.
//!
//! Complex scores use the Wirtinger convention `s = d log p / d conj(x)`,
//! i.e. half the real gradient packed as `(d/dRe + i d/dIm) / 2`. Under this
//! convention the reverse drift is `-f + g^2 s` and the score of
//! `N_C(mu, v)` is `-(x - mu) / v`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::sde::SdeSpec;

/// Lower bound of the uniform time distribution in [`dsm_loss`].
pub const DSM_T_EPS: f64 = 0.03;

/// Approximation of `grad_x log p_t(x | y)`.
pub trait ScoreFunction: Sync {
    fn score(&self, x: &ComplexGrid, y: &ComplexGrid, t: f64) -> Result<ComplexGrid>;
}

impl<F> ScoreFunction for F
where
    F: Fn(&ComplexGrid, &ComplexGrid, f64) -> Result<ComplexGrid> + Sync,
{
    fn score(&self, x: &ComplexGrid, y: &ComplexGrid, t: f64) -> Result<ComplexGrid> {
        self(x, y, t)
    }
}

/// Always returns zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroScore;

impl ScoreFunction for ZeroScore {
    fn score(&self, x: &ComplexGrid, _y: &ComplexGrid, _t: f64) -> Result<ComplexGrid> {
        Ok(ComplexGrid::zeros(x.bins(), x.frames()))
    }
}

/// Gaussian stand-in for the clean-speech distribution: `X_0 ~ N_C(m0, s0sq I)`
/// conditioned on the mixture, driven by `spec`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTaskSpec {
    pub m0: ComplexGrid,
    pub s0sq: f64,
    pub spec: SdeSpec,
}

impl GaussianTaskSpec {
    pub fn new(m0: ComplexGrid, s0sq: f64, spec: SdeSpec) -> Result<Self> {
        if !(s0sq.is_finite() && s0sq >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior variance must be nonnegative, got {s0sq}"
            )));
        }
        Ok(Self { m0, s0sq, spec })
    }

    /// Marginal mean `a m0 + b y` and variance `a^2 s0sq + sigma^2` of `X_t | Y`.
    pub fn marginal(&self, y: &ComplexGrid, t: f64) -> Result<(ComplexGrid, f64)> {
        let (a, b) = self.spec.mean_coefficients(t);
        let mean = self.m0.lin_comb(a, y, b)?;
        let var = a * a * self.s0sq + self.spec.variance(t)?;
        Ok((mean, var))
    }
}

/// Exact score of the Gaussian task, optionally scaled by `lambda`.
#[derive(Debug, Clone)]
pub struct AnalyticGaussianScore {
    task: GaussianTaskSpec,
    lambda: f64,
}

pub fn analytic_gaussian_score(task: GaussianTaskSpec) -> AnalyticGaussianScore {
    AnalyticGaussianScore { task, lambda: 1.0 }
}

impl AnalyticGaussianScore {
    /// Member `s_lambda = lambda * s` of the scaled family used to probe DSM optimality.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            task: self.task.clone(),
            lambda,
        }
    }

    pub fn task(&self) -> &GaussianTaskSpec {
        &self.task
    }
}

impl ScoreFunction for AnalyticGaussianScore {
    fn score(&self, x: &ComplexGrid, y: &ComplexGrid, t: f64) -> Result<ComplexGrid> {
        let (mean, var) = self.task.marginal(y, t)?;
        if !(var > 0.0) {
            return Err(Error::DegenerateVariance { t });
        }
        let factor = -self.lambda / var;
        x.zip_map(&mean, |xv, mv| (xv - mv) * factor)
    }
}

/// Monte-Carlo estimate of the denoising score-matching loss
/// `E || s(mu + sigma Z, y, t) + Z / sigma ||^2`, with `t ~ U[DSM_T_EPS, T]`,
/// one `Z` per (t draw, pair). Returns the mean over `n_t_samples * batch.len()`
/// terms. Reusing an identically seeded `rng` across scores gives common
/// random numbers.
pub fn dsm_loss<S, R>(
    score: &S,
    spec: &SdeSpec,
    batch: &[(ComplexGrid, ComplexGrid)],
    n_t_samples: usize,
    rng: &mut R,
) -> Result<f64>
where
    S: ScoreFunction + ?Sized,
    R: Rng + ?Sized,
{
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if n_t_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_t_samples must be positive".into(),
        ));
    }
    let t_max = spec.t_end();
    if t_max <= DSM_T_EPS {
        return Err(Error::InvalidArgument(format!(
            "T = {t_max} is below the DSM time floor {DSM_T_EPS}"
        )));
    }
    let mut total = 0.0;
    for _ in 0..n_t_samples {
        let t = rng.random_range(DSM_T_EPS..=t_max);
        let sigma = spec.std(t)?;
        for (x0, y) in batch {
            let moments = spec.kernel_moments(x0, y, t)?;
            let z = ComplexGrid::standard_normal(x0.bins(), x0.frames(), rng);
            let xt = moments.mean.lin_comb(1.0, &z, sigma)?;
            let s = score.score(&xt, y, t)?;
            let residual = s.lin_comb(1.0, &z, 1.0 / sigma)?;
            total += residual.norm_sqr();
        }
    }
    Ok(total / (n_t_samples * batch.len()) as f64)
}
