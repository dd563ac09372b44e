//! OUVE and BBED diffusion processes.
//!
//! Both are linear SDEs `dX = f(X, Y) dt + g(t) dw` on complex coefficient
//! grids with `g(t) = sqrt(c) k^t`. They differ in the drift:
//!
//! * OUVE (Ornstein-Uhlenbeck, variance exploding): `f = gamma (Y - X)`.
//! * BBED (Brownian bridge, exploding diffusion): `f = (Y - X) / (1 - t)`.
//!
//! The perturbation kernel `X_t | X_0, Y` is `N_C(mu(t), sigma(t)^2 I)` with
//! `mu(t) = a(t) X_0 + b(t) Y`. Complex noise follows the unit-power
//! convention: real and imaginary parts each carry half of `sigma^2`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::special_fns::expint_ei;

/// BBED drift is rejected within this distance of t = 1.
pub const BBED_SINGULARITY_GUARD: f64 = 1e-6;

/// Round-off tolerance below which a negative variance is treated as zero.
const VARIANCE_CLAMP_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SdeKind {
    #[serde(rename = "OUVE", alias = "ouve")]
    Ouve,
    #[serde(rename = "BBED", alias = "bbed")]
    Bbed,
}

impl SdeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SdeKind::Ouve => "OUVE",
            SdeKind::Bbed => "BBED",
        }
    }
}

impl fmt::Display for SdeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SdeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ouve" => Ok(SdeKind::Ouve),
            "bbed" => Ok(SdeKind::Bbed),
            other => Err(Error::InvalidSpec(format!("unknown SDE kind {other:?}"))),
        }
    }
}

/// Parameterization of one SDE. Construct through [`SdeSpec::new`] or the
/// per-kind helpers so the invariants are checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdeSpec {
    kind: SdeKind,
    gamma: f64,
    c: f64,
    k: f64,
    #[serde(rename = "T")]
    t_end: f64,
}

impl SdeSpec {
    pub const OUVE_GAMMA: f64 = 1.5;
    pub const OUVE_K: f64 = 10.0;
    pub const OUVE_T: f64 = 1.0;
    pub const OUVE_C: f64 = 0.18;
    pub const BBED_K: f64 = 2.6;
    pub const BBED_T: f64 = 0.999;
    pub const BBED_C: f64 = 0.08;

    pub fn new(kind: SdeKind, gamma: f64, c: f64, k: f64, t_end: f64) -> Result<Self> {
        let spec = Self {
            kind,
            gamma,
            c,
            k,
            t_end,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ouve(gamma: f64, c: f64, k: f64, t_end: f64) -> Result<Self> {
        Self::new(SdeKind::Ouve, gamma, c, k, t_end)
    }

    pub fn bbed(c: f64, k: f64, t_end: f64) -> Result<Self> {
        Self::new(SdeKind::Bbed, 0.0, c, k, t_end)
    }

    /// OUVE with gamma = 1.5, k = 10, T = 1 and the given variance scale.
    pub fn default_ouve(c: f64) -> Result<Self> {
        Self::ouve(Self::OUVE_GAMMA, c, Self::OUVE_K, Self::OUVE_T)
    }

    /// BBED with k = 2.6, T = 0.999 and the given variance scale.
    pub fn default_bbed(c: f64) -> Result<Self> {
        Self::bbed(c, Self::BBED_K, Self::BBED_T)
    }

    pub fn default_for(kind: SdeKind, c: f64) -> Result<Self> {
        match kind {
            SdeKind::Ouve => Self::default_ouve(c),
            SdeKind::Bbed => Self::default_bbed(c),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("T must be positive, got {}", self.t_end));
        }
        match self.kind {
            SdeKind::Ouve => {
                if !(self.gamma.is_finite() && self.gamma > 0.0) {
                    return bad(format!("gamma must be positive, got {}", self.gamma));
                }
                if (self.gamma + self.k.ln()).abs() < 1e-12 {
                    return bad("gamma + ln(k) must be nonzero".into());
                }
            }
            SdeKind::Bbed => {
                if self.t_end >= 1.0 {
                    return bad(format!("BBED needs T < 1, got {}", self.t_end));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> SdeKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Largest time the reverse process may start from.
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Same process with a different variance scale.
    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::new(self.kind, self.gamma, c, self.k, self.t_end)
    }

    pub fn with_t_end(&self, t_end: f64) -> Result<Self> {
        Self::new(self.kind, self.gamma, self.c, self.k, t_end)
    }

    /// Short identifier used in report rows, e.g. `BBED_c0.08_k2.6_T0.999`.
    pub fn id(&self) -> String {
        match self.kind {
            SdeKind::Ouve => format!(
                "OUVE_g{}_c{}_k{}_T{}",
                self.gamma, self.c, self.k, self.t_end
            ),
            SdeKind::Bbed => format!("BBED_c{}_k{}_T{}", self.c, self.k, self.t_end),
        }
    }

    /// Scalar `kappa(t)` with `f(X, Y) = kappa(t) (Y - X)`.
    pub fn drift_rate(&self, t: f64) -> Result<f64> {
        match self.kind {
            SdeKind::Ouve => Ok(self.gamma),
            SdeKind::Bbed => {
                if t >= 1.0 - BBED_SINGULARITY_GUARD {
                    return Err(Error::Singularity { t });
                }
                Ok(1.0 / (1.0 - t))
            }
        }
    }

    pub fn drift(&self, x: &ComplexGrid, y: &ComplexGrid, t: f64) -> Result<ComplexGrid> {
        let rate = self.drift_rate(t)?;
        y.zip_map(x, |yv, xv| (yv - xv) * rate)
    }

    /// `g(t) = sqrt(c) k^t`.
    pub fn diffusion(&self, t: f64) -> f64 {
        self.c.sqrt() * self.k.powf(t)
    }

    /// Coefficients `(a, b)` of `mu(t) = a X_0 + b Y`.
    pub fn mean_coefficients(&self, t: f64) -> (f64, f64) {
        match self.kind {
            SdeKind::Ouve => {
                let a = (-self.gamma * t).exp();
                (a, -(-self.gamma * t).exp_m1())
            }
            SdeKind::Bbed => (1.0 - t, t),
        }
    }

    /// Closed-form kernel variance `sigma(t)^2`, defined on `t >= 0` (OUVE)
    /// or `0 <= t <= 1` (BBED, zero at both ends).
    pub fn variance(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.max_time(),
            });
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let ln_k = self.k.ln();
        let v = match self.kind {
            SdeKind::Ouve => {
                // c (k^{2t} - e^{-2 gamma t}) / (2 (gamma + ln k))
                let num = (2.0 * t * ln_k).exp_m1() - (-2.0 * self.gamma * t).exp_m1();
                self.c * num / (2.0 * (self.gamma + ln_k))
            }
            SdeKind::Bbed => {
                if t > 1.0 {
                    return Err(Error::TimeOutOfRange {
                        t,
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
                if t == 1.0 {
                    return Ok(0.0);
                }
                let s = 1.0 - t;
                if ln_k == 0.0 {
                    // k = 1: constant diffusion, sigma^2 = c t (1 - t)
                    self.c * t * s
                } else {
                    // (1-t) c [ (k^{2t} - 1 + t) + ln(k^{2k^2}) (1-t) E ]
                    // E = Ei[2(t-1) ln k] - Ei[-2 ln k]
                    let e = expint_ei(-2.0 * s * ln_k)? - expint_ei(-2.0 * ln_k)?;
                    let ln_k_2k2 = 2.0 * self.k * self.k * ln_k;
                    s * self.c * (((2.0 * t * ln_k).exp_m1() + t) + ln_k_2k2 * s * e)
                }
            }
        };
        if v < 0.0 {
            debug_assert!(
                v > -VARIANCE_CLAMP_TOL * self.c.max(1.0) * 1e3,
                "variance {v} at t = {t} is negative beyond round-off"
            );
            return Ok(0.0);
        }
        Ok(v)
    }

    pub fn std(&self, t: f64) -> Result<f64> {
        Ok(self.variance(t)?.sqrt())
    }

    fn max_time(&self) -> f64 {
        match self.kind {
            SdeKind::Ouve => f64::INFINITY,
            SdeKind::Bbed => 1.0,
        }
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(t.is_finite() && (0.0..=self.t_end).contains(&t)) {
            return Err(Error::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.t_end,
            });
        }
        Ok(())
    }

    /// Mean and standard deviation of `X_t | X_0 = x0, Y = y`, `0 <= t <= T`.
    pub fn kernel_moments(
        &self,
        x0: &ComplexGrid,
        y: &ComplexGrid,
        t: f64,
    ) -> Result<KernelMoments> {
        self.check_time(t)?;
        let (a, b) = self.mean_coefficients(t);
        let mean = x0.lin_comb(a, y, b)?;
        Ok(KernelMoments {
            mean,
            std: self.std(t)?,
        })
    }

    /// Draws `X_t = mu(t) + sigma(t) Z` with `Z ~ N_C(0, I)`.
    pub fn sample_perturbation<R: Rng + ?Sized>(
        &self,
        x0: &ComplexGrid,
        y: &ComplexGrid,
        t: f64,
        rng: &mut R,
    ) -> Result<ComplexGrid> {
        let moments = self.kernel_moments(x0, y, t)?;
        let (bins, frames) = moments.mean.shape();
        let z = ComplexGrid::standard_normal(bins, frames, rng);
        moments.mean.lin_comb(1.0, &z, moments.std)
    }

    /// `||mu(T) - y||_2`, the gap between the forward mean at the reverse
    /// start time and the mixture.
    pub fn prior_mismatch(&self, x0: &ComplexGrid, y: &ComplexGrid) -> Result<f64> {
        self.prior_mismatch_at(x0, y, self.t_end)
    }

    /// `||mu(t) - y||_2 = a(t) ||x0 - y||_2`, for reverse starts below `T`.
    pub fn prior_mismatch_at(&self, x0: &ComplexGrid, y: &ComplexGrid, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let (a, _) = self.mean_coefficients(t);
        Ok(a * x0.zip_map(y, |p, q| p - q)?.norm())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SdeSpec serializes to TOML")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config {
            path: None,
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config {
            path: Some(path.to_path_buf()),
            msg: e.to_string(),
        })
    }
}

/// Plain-text config form. Missing keys take the per-kind defaults.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SdeSpecConfig {
    kind: SdeKind,
    gamma: Option<f64>,
    c: Option<f64>,
    k: Option<f64>,
    #[serde(rename = "T")]
    t_end: Option<f64>,
}

impl<'de> Deserialize<'de> for SdeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SdeSpecConfig::deserialize(d)?;
        let spec = match raw.kind {
            SdeKind::Ouve => SdeSpec::ouve(
                raw.gamma.unwrap_or(SdeSpec::OUVE_GAMMA),
                raw.c.unwrap_or(SdeSpec::OUVE_C),
                raw.k.unwrap_or(SdeSpec::OUVE_K),
                raw.t_end.unwrap_or(SdeSpec::OUVE_T),
            ),
            SdeKind::Bbed => SdeSpec::new(
                SdeKind::Bbed,
                raw.gamma.unwrap_or(0.0),
                raw.c.unwrap_or(SdeSpec::BBED_C),
                raw.k.unwrap_or(SdeSpec::BBED_K),
                raw.t_end.unwrap_or(SdeSpec::BBED_T),
            ),
        };
        spec.map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMoments {
    pub mean: ComplexGrid,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub t: f64,
    pub x: ComplexGrid,
}
