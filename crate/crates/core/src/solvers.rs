//! First-order Euler-Maruyama integration.
//!
//! Forward: `X_{t+h} = X_t + f(X_t, Y) h + g(t) sqrt(h) z`.
//! Reverse: `X_{t-h} = X_t - [f(X_t, Y) - g(t)^2 s(X_t, Y, t)] h + g(t) sqrt(h) z`,
//! started from `N_C(Y, sigma(t_rsp)^2 I)` on the uniform grid
//! `t_n = t_rsp (1 - n / N)`.
//!
//! Monte-Carlo statistics split paths into fixed chunks of
//! [`MC_CHUNK_PATHS`]; chunk `i` draws from `rng::stream(seed, i)` where
//! `seed` is the first `u64` taken from the caller's generator.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::rng::{complex_normal, stream};
use crate::score::ScoreFunction;
use crate::sde::{DiffusionState, SdeKind, SdeSpec};

pub const MC_CHUNK_PATHS: usize = 1000;
pub const MC_MIN_PATHS: usize = 1000;

/// Reverse sampler settings. The step size is `t_rsp / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub t_rsp: f64,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub denoise_final: bool,
}

impl SamplerConfig {
    pub fn new(t_rsp: f64, n_steps: usize, seed: u64) -> Self {
        Self {
            t_rsp,
            n_steps,
            seed,
            denoise_final: false,
        }
    }

    /// Starts at `T` of `spec`.
    pub fn from_t_end(spec: &SdeSpec, n_steps: usize, seed: u64) -> Self {
        Self::new(spec.t_end(), n_steps, seed)
    }

    /// Smallest step count whose uniform step does not exceed `dt`.
    pub fn with_max_step(t_rsp: f64, dt: f64, seed: u64) -> Self {
        Self::new(t_rsp, steps_for(t_rsp, dt), seed)
    }

    pub fn dt(&self) -> f64 {
        self.t_rsp / self.n_steps as f64
    }

    pub fn validate(&self, spec: &SdeSpec) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if !(self.t_rsp.is_finite() && self.t_rsp > 0.0 && self.t_rsp <= spec.t_end()) {
            return Err(Error::TimeOutOfRange {
                t: self.t_rsp,
                lo: 0.0,
                hi: spec.t_end(),
            });
        }
        Ok(())
    }
}

fn steps_for(t_end: f64, dt: f64) -> usize {
    ((t_end / dt) - 1e-9).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DiffusionState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&DiffusionState> {
        self.states.last()
    }

    /// Columns: `t, re0, im0, re1, im1, ...` (coefficients in storage order).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.states.first().map_or(0, |s| s.x.len());
        write!(w, "t")?;
        for i in 0..d {
            write!(w, ",re{i},im{i}")?;
        }
        writeln!(w)?;
        for s in &self.states {
            write!(w, "{:e}", s.t)?;
            for v in s.x.as_slice() {
                write!(w, ",{:e},{:e}", v.re, v.im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_forward_args(spec: &SdeSpec, t_end: f64, dt: f64) -> Result<()> {
    if spec.kind() == SdeKind::Bbed && t_end >= 1.0 {
        return Err(Error::Singularity { t: t_end });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(t_end >= dt && t_end <= spec.t_end()) {
        return Err(Error::TimeOutOfRange {
            t: t_end,
            lo: dt,
            hi: spec.t_end(),
        });
    }
    Ok(())
}

#[inline]
fn forward_step<R: Rng + ?Sized>(
    x: &mut [Complex64],
    y: &[Complex64],
    rate_h: f64,
    noise: f64,
    rng: &mut R,
) {
    for (xv, &yv) in x.iter_mut().zip(y) {
        *xv += (yv - *xv) * rate_h + complex_normal(rng) * noise;
    }
}

/// Simulates one forward path on a uniform grid from `(0, x0)` to `t_end`.
/// The step is `t_end / ceil(t_end / dt)`, at most `dt`.
pub fn forward_euler_maruyama<R: Rng + ?Sized>(
    spec: &SdeSpec,
    x0: &ComplexGrid,
    y: &ComplexGrid,
    t_end: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    x0.check_same_shape(y)?;
    check_forward_args(spec, t_end, dt)?;
    let n = steps_for(t_end, dt);
    let h = t_end / n as f64;
    let mut x = x0.clone();
    let mut states = Vec::with_capacity(n + 1);
    states.push(DiffusionState {
        t: 0.0,
        x: x.clone(),
    });
    for i in 0..n {
        let t = i as f64 * h;
        let rate_h = spec.drift_rate(t)? * h;
        let noise = spec.diffusion(t) * h.sqrt();
        forward_step(x.as_mut_slice(), y.as_slice(), rate_h, noise, rng);
        states.push(DiffusionState {
            t: (i + 1) as f64 * h,
            x: x.clone(),
        });
    }
    Ok(Trajectory { states })
}

/// Empirical moments of the forward process over many simulated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStats {
    pub t: f64,
    /// Per-coefficient sample mean.
    pub mean: ComplexGrid,
    /// Pooled unbiased complex variance, `mean_i sum_p |x_pi - mean_i|^2 / (n - 1)`.
    pub var: f64,
    pub n_paths: usize,
}

impl KernelStats {
    /// Standard error of each real component of the mean.
    pub fn mean_standard_error(&self) -> f64 {
        (self.var / 2.0 / self.n_paths as f64).sqrt()
    }
}

/// Per-coefficient running mean and sum of squared deviations.
#[derive(Clone)]
struct Moments {
    n: usize,
    mean: Vec<Complex64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self {
            n: 0,
            mean: vec![Complex64::new(0.0, 0.0); d],
            m2: vec![0.0; d],
        }
    }

    fn push(&mut self, x: &[Complex64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, m2), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *m2 += delta.re * (v - *m).re + delta.im * (v - *m).im;
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * (nb / n);
            self.m2[i] += other.m2[i] + delta.norm_sqr() * na * nb / n;
        }
        self.n += other.n;
    }
}

/// Closed-form-free estimate of the kernel moments at several times from one
/// batch of forward paths. Every time must be a multiple of `dt`.
pub fn monte_carlo_kernel_stats_at<R: Rng + ?Sized>(
    spec: &SdeSpec,
    x0: &ComplexGrid,
    y: &ComplexGrid,
    times: &[f64],
    n_paths: usize,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<KernelStats>> {
    x0.check_same_shape(y)?;
    if n_paths < MC_MIN_PATHS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MC_MIN_PATHS} paths, got {n_paths}"
        )));
    }
    let t_last = times.iter().copied().fold(0.0, f64::max);
    let mut record_at = Vec::with_capacity(times.len());
    for &t in times {
        if t == 0.0 {
            record_at.push(0usize);
            continue;
        }
        check_forward_args(spec, t, dt)?;
        let steps = (t / dt).round();
        if (steps * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "time {t} is not a multiple of dt = {dt}"
            )));
        }
        record_at.push(steps as usize);
    }
    if t_last > 0.0 {
        check_forward_args(spec, t_last, dt)?;
    }
    let n_total = record_at.iter().copied().max().unwrap_or(0);

    // per-step coefficients are shared by all paths
    let coeffs: Vec<(f64, f64)> = (0..n_total)
        .map(|i| {
            let t = i as f64 * dt;
            Ok((spec.drift_rate(t)? * dt, spec.diffusion(t) * dt.sqrt()))
        })
        .collect::<Result<_>>()?;

    let seed: u64 = rng.random();
    let d = x0.len();
    let n_chunks = n_paths.div_ceil(MC_CHUNK_PATHS);
    let partials: Vec<Vec<Moments>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream(seed, chunk as u64);
            let paths = MC_CHUNK_PATHS.min(n_paths - chunk * MC_CHUNK_PATHS);
            let mut acc = vec![Moments::new(d); times.len()];
            let mut x = vec![Complex64::new(0.0, 0.0); d];
            for _ in 0..paths {
                x.copy_from_slice(x0.as_slice());
                for (slot, &at) in record_at.iter().enumerate() {
                    if at == 0 {
                        acc[slot].push(&x);
                    }
                }
                for (i, &(rate_h, noise)) in coeffs.iter().enumerate() {
                    forward_step(&mut x, y.as_slice(), rate_h, noise, &mut rng);
                    for (slot, &at) in record_at.iter().enumerate() {
                        if at == i + 1 {
                            acc[slot].push(&x);
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = vec![Moments::new(d); times.len()];
    for chunk in &partials {
        for (t, m) in total.iter_mut().zip(chunk) {
            t.merge(m);
        }
    }
    total
        .into_iter()
        .zip(times)
        .map(|(m, &t)| {
            let var = m.m2.iter().sum::<f64>() / d as f64 / (m.n as f64 - 1.0);
            Ok(KernelStats {
                t,
                mean: ComplexGrid::from_vec(x0.bins(), x0.frames(), m.mean)?,
                var,
                n_paths: m.n,
            })
        })
        .collect()
}

/// Empirical mean and pooled variance of `X_t` over `n_paths` forward paths.
pub fn monte_carlo_kernel_stats<R: Rng + ?Sized>(
    spec: &SdeSpec,
    x0: &ComplexGrid,
    y: &ComplexGrid,
    t: f64,
    n_paths: usize,
    dt: f64,
    rng: &mut R,
) -> Result<KernelStats> {
    let dt = if t > 0.0 {
        t / steps_for(t, dt) as f64
    } else {
        dt
    };
    let mut out = monte_carlo_kernel_stats_at(spec, x0, y, &[t], n_paths, dt, rng)?;
    Ok(out.remove(0))
}

/// Solves the reverse SDE from `t_rsp` down to 0 and returns `X_0`.
/// Evaluates `score` exactly `cfg.n_steps` times.
pub fn reverse_euler_maruyama<S, R>(
    spec: &SdeSpec,
    y: &ComplexGrid,
    score: &S,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<ComplexGrid>
where
    S: ScoreFunction + ?Sized,
    R: Rng + ?Sized,
{
    reverse_impl(spec, y, score, cfg, rng, None)
}

/// Same as [`reverse_euler_maruyama`] but keeps every intermediate state.
pub fn reverse_euler_maruyama_trajectory<S, R>(
    spec: &SdeSpec,
    y: &ComplexGrid,
    score: &S,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Trajectory>
where
    S: ScoreFunction + ?Sized,
    R: Rng + ?Sized,
{
    let mut traj = Trajectory::default();
    reverse_impl(spec, y, score, cfg, rng, Some(&mut traj))?;
    Ok(traj)
}

fn reverse_impl<S, R>(
    spec: &SdeSpec,
    y: &ComplexGrid,
    score: &S,
    cfg: &SamplerConfig,
    rng: &mut R,
    mut record: Option<&mut Trajectory>,
) -> Result<ComplexGrid>
where
    S: ScoreFunction + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate(spec)?;
    let n = cfg.n_steps;
    let h = cfg.dt();
    let sigma0 = spec.std(cfg.t_rsp)?;
    let mut x = y.clone();
    for v in x.as_mut_slice() {
        *v += complex_normal(rng) * sigma0;
    }
    if let Some(tr) = record.as_deref_mut() {
        tr.states.push(DiffusionState {
            t: cfg.t_rsp,
            x: x.clone(),
        });
    }
    for step in 0..n {
        let t = cfg.t_rsp * (1.0 - step as f64 / n as f64);
        let s = score.score(&x, y, t)?;
        x.check_same_shape(&s)?;
        if !s.is_finite() {
            return Err(Error::Diverged { t });
        }
        let rate = spec.drift_rate(t)?;
        let g = spec.diffusion(t);
        let g2h = g * g * h;
        let noise = if cfg.denoise_final && step + 1 == n {
            0.0
        } else {
            g * h.sqrt()
        };
        for ((xv, &yv), &sv) in x
            .as_mut_slice()
            .iter_mut()
            .zip(y.as_slice())
            .zip(s.as_slice())
        {
            let mut next = *xv - (yv - *xv) * (rate * h) + sv * g2h;
            if noise != 0.0 {
                next += complex_normal(rng) * noise;
            }
            *xv = next;
        }
        if !x.is_finite() {
            return Err(Error::Diverged { t });
        }
        if let Some(tr) = record.as_deref_mut() {
            tr.states.push(DiffusionState {
                t: cfg.t_rsp * (1.0 - (step + 1) as f64 / n as f64),
                x: x.clone(),
            });
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::score::ZeroScore;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar(v: Complex64) -> ComplexGrid {
        ComplexGrid::scalar(v)
    }

    #[test]
    fn sampler_config_validation() {
        let spec = SdeSpec::default_bbed(0.08).unwrap();
        assert!(SamplerConfig::new(0.999, 60, 0).validate(&spec).is_ok());
        assert!(SamplerConfig::new(1.0, 60, 0).validate(&spec).is_err());
        assert!(SamplerConfig::new(0.5, 0, 0).validate(&spec).is_err());
        assert!(SamplerConfig::new(0.0, 5, 0).validate(&spec).is_err());
    }

    #[test]
    fn fixed_step_rounds_up() {
        let c = SamplerConfig::with_max_step(0.999, 1.0 / 30.0, 0);
        assert_eq!(c.n_steps, 30);
        let c = SamplerConfig::with_max_step(0.91, 1.0 / 30.0, 0);
        assert_eq!(c.n_steps, 28);
        assert!(c.dt() <= 1.0 / 30.0);
        let c = SamplerConfig::with_max_step(0.19, 1.0 / 30.0, 0);
        assert_eq!(c.n_steps, 6);
    }

    #[test]
    fn forward_trajectory_shape_and_start() {
        let spec = SdeSpec::default_ouve(0.18).unwrap();
        let x0 = scalar(c64(0.2, 0.1));
        let y = scalar(c64(1.0, 0.0));
        let tr = forward_euler_maruyama(&spec, &x0, &y, 0.5, 0.01, &mut seeded(1)).unwrap();
        assert_eq!(tr.len(), 51);
        assert_eq!(tr.states[0].t, 0.0);
        assert_eq!(tr.states[0].x, x0);
        for w in tr.states.windows(2) {
            assert!((w[1].t - w[0].t - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_rejects_bad_arguments() {
        let bbed = SdeSpec::default_bbed(0.08).unwrap();
        let g = scalar(c64(0.0, 0.0));
        assert!(matches!(
            forward_euler_maruyama(&bbed, &g, &g, 1.0, 0.01, &mut seeded(0)),
            Err(Error::Singularity { .. })
        ));
        let ouve = SdeSpec::default_ouve(0.18).unwrap();
        assert!(forward_euler_maruyama(&ouve, &g, &g, 1.5, 0.01, &mut seeded(0)).is_err());
        assert!(forward_euler_maruyama(&ouve, &g, &g, 0.5, 0.0, &mut seeded(0)).is_err());
        assert!(forward_euler_maruyama(&ouve, &g, &g, 0.005, 0.01, &mut seeded(0)).is_err());
    }

    #[test]
    fn forward_noise_free_limit_tracks_mean() {
        let spec = SdeSpec::ouve(1.5, 1e-30, 10.0, 1.0).unwrap();
        let x0 = scalar(c64(1.0, -1.0));
        let y = scalar(c64(0.0, 0.5));
        let dt = 1e-4;
        let tr = forward_euler_maruyama(&spec, &x0, &y, 1.0, dt, &mut seeded(0)).unwrap();
        let want = spec.kernel_moments(&x0, &y, 1.0).unwrap().mean;
        let err = (tr.last().unwrap().x.as_slice()[0] - want.as_slice()[0]).norm();
        assert!(err < 2.0 * dt, "err = {err}");
    }

    #[test]
    fn forward_stays_at_mixture_in_mean() {
        let spec = SdeSpec::default_ouve(0.18).unwrap();
        let y = scalar(c64(0.7, -0.3));
        let stats =
            monte_carlo_kernel_stats(&spec, &y, &y, 0.5, 4000, 1e-2, &mut seeded(4)).unwrap();
        let err = (stats.mean.as_slice()[0] - y.as_slice()[0]).norm();
        assert!(err < 4.0 * stats.mean_standard_error() * 2f64.sqrt());
    }

    #[test]
    fn mc_stats_at_zero() {
        let spec = SdeSpec::default_bbed(0.08).unwrap();
        let x0 = scalar(c64(0.3, 0.3));
        let y = scalar(c64(1.0, 0.0));
        let s = monte_carlo_kernel_stats(&spec, &x0, &y, 0.0, 1000, 1e-3, &mut seeded(0)).unwrap();
        assert_eq!(s.mean, x0);
        assert_eq!(s.var, 0.0);
    }

    #[test]
    fn mc_stats_need_enough_paths() {
        let spec = SdeSpec::default_bbed(0.08).unwrap();
        let g = scalar(c64(0.0, 0.0));
        assert!(monte_carlo_kernel_stats(&spec, &g, &g, 0.5, 999, 1e-2, &mut seeded(0)).is_err());
    }

    #[test]
    fn mc_stats_reject_off_grid_times() {
        let spec = SdeSpec::default_ouve(0.18).unwrap();
        let g = scalar(c64(0.0, 0.0));
        assert!(
            monte_carlo_kernel_stats_at(&spec, &g, &g, &[0.255], 1000, 1e-2, &mut seeded(0))
                .is_err()
        );
    }

    #[test]
    fn mc_stats_are_seed_deterministic() {
        let spec = SdeSpec::default_ouve(0.18).unwrap();
        let x0 = scalar(c64(0.3, 0.3));
        let y = scalar(c64(1.0, 0.0));
        let a = monte_carlo_kernel_stats(&spec, &x0, &y, 0.2, 2500, 1e-2, &mut seeded(9)).unwrap();
        let b = monte_carlo_kernel_stats(&spec, &x0, &y, 0.2, 2500, 1e-2, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_paths, 2500);
    }

    #[test]
    fn reverse_counts_score_evaluations() {
        let spec = SdeSpec::default_bbed(0.08).unwrap();
        let calls = AtomicUsize::new(0);
        let score = |x: &ComplexGrid, _y: &ComplexGrid, _t: f64| {
            calls.fetch_add(1, Ordering::Relaxed);
            Ok(ComplexGrid::zeros(x.bins(), x.frames()))
        };
        let y = ComplexGrid::zeros(3, 2);
        let cfg = SamplerConfig::from_t_end(&spec, 17, 0);
        reverse_euler_maruyama(&spec, &y, &score, &cfg, &mut seeded(0)).unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), 17);
    }

    #[test]
    fn reverse_is_seed_deterministic() {
        let spec = SdeSpec::default_ouve(0.18).unwrap();
        let y = ComplexGrid::filled(4, 2, c64(0.5, 0.5));
        let cfg = SamplerConfig::from_t_end(&spec, 30, 3);
        let a = reverse_euler_maruyama(&spec, &y, &ZeroScore, &cfg, &mut seeded(3)).unwrap();
        let b = reverse_euler_maruyama(&spec, &y, &ZeroScore, &cfg, &mut seeded(3)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn reverse_reports_divergence() {
        let spec = SdeSpec::default_bbed(0.08).unwrap();
        let score = |x: &ComplexGrid, _y: &ComplexGrid, t: f64| {
            let v = if t < 0.5 { f64::NAN } else { 0.0 };
            Ok(ComplexGrid::filled(x.bins(), x.frames(), c64(v, 0.0)))
        };
        let y = ComplexGrid::zeros(2, 1);
        let cfg = SamplerConfig::from_t_end(&spec, 10, 0);
        match reverse_euler_maruyama(&spec, &y, &score, &cfg, &mut seeded(0)) {
            Err(Error::Diverged { t }) => assert!(t < 0.5 && t > 0.3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn reverse_zero_score_without_noise_is_the_drift_flow() {
        // With g ~ 0 and s = 0 each step is x <- x - kappa(t) (y - x) h.
        let spec = SdeSpec::ouve(1.5, 1e-30, 10.0, 1.0).unwrap();
        let y = scalar(c64(1.0, 0.0));
        let cfg = SamplerConfig::from_t_end(&spec, 20, 0);
        let out = reverse_euler_maruyama(&spec, &y, &ZeroScore, &cfg, &mut seeded(0)).unwrap();
        // starts at y (sigma ~ 0) where the drift vanishes
        assert!((out.as_slice()[0] - y.as_slice()[0]).norm() < 1e-12);

        let zero_score_from = |start: Complex64| {
            let mut x = start;
            let h = cfg.dt();
            for _ in 0..cfg.n_steps {
                x -= (y.as_slice()[0] - x) * (1.5 * h);
            }
            x
        };
        let tr =
            reverse_euler_maruyama_trajectory(&spec, &y, &ZeroScore, &cfg, &mut seeded(0)).unwrap();
        assert_eq!(tr.len(), 21);
        assert_eq!(tr.states[0].t, 1.0);
        assert!(tr.last().unwrap().t.abs() < 1e-12);
        let expected = zero_score_from(tr.states[0].x.as_slice()[0]);
        assert!((tr.last().unwrap().x.as_slice()[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn denoise_final_drops_last_noise() {
        let spec = SdeSpec::default_bbed(0.51).unwrap();
        let y = ComplexGrid::zeros(64, 1);
        let score = |x: &ComplexGrid, _y: &ComplexGrid, t: f64| {
            // cancels x and the drift term, so only the noise survives a step
            let h = 0.999 / 5.0;
            let k = spec.drift_rate(t)?;
            Ok(x.scale(-(1.0 + k * h) / (spec.diffusion(t).powi(2) * h)))
        };
        let mut cfg = SamplerConfig::from_t_end(&spec, 5, 0);
        cfg.denoise_final = true;
        let out = reverse_euler_maruyama(&spec, &y, &score, &cfg, &mut seeded(1)).unwrap();
        assert!(out.norm() < 1e-9, "{}", out.norm());
        cfg.denoise_final = false;
        let out = reverse_euler_maruyama(&spec, &y, &score, &cfg, &mut seeded(1)).unwrap();
        assert!(out.norm() > 1e-3);
    }

    #[test]
    fn trajectory_csv_layout() {
        let spec = SdeSpec::default_ouve(0.18).unwrap();
        let x0 = ComplexGrid::zeros(2, 1);
        let tr = forward_euler_maruyama(&spec, &x0, &x0, 0.1, 0.05, &mut seeded(0)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,re0,im0,re1,im1");
        assert_eq!(lines.count(), 3);
    }
}
