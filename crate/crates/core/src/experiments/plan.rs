use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::toy::ToyConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricAdapterConfig;
use crate::sde::SdeSpec;

/// Reverse step size of the start-time sweep.
pub const TRSP_DT: f64 = 1.0 / 30.0;

/// Input of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    GaussianToy(ToyConfig),
    /// Metrics only: the estimate comes from an external enhancer.
    WavPair(WavPairConfig),
}

impl Default for Task {
    fn default() -> Self {
        Task::GaussianToy(ToyConfig::default())
    }
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::GaussianToy(_) => "gaussian_toy",
            Task::WavPair(_) => "wav_pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavPairConfig {
    pub clean: PathBuf,
    pub noisy: PathBuf,
    pub estimate: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub seed: u64,
    #[serde(rename = "sde")]
    pub sdes: Vec<SdeSpec>,
    /// Step counts for reverse solves started at `T`.
    pub n_steps: Vec<usize>,
    /// Start times of the start-time sweep; `None` means `T, 0.91, ..., 0.19`.
    pub t_rsp: Option<Vec<f64>>,
    /// Fixed step size of the start-time sweep.
    pub dt: f64,
    pub denoise_final: bool,
    /// Adds wall-clock seconds to each row, which makes reports non-reproducible.
    pub record_timing: bool,
    pub task: Task,
    pub metric: Option<MetricAdapterConfig>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            seed: 0,
            sdes: Vec::new(),
            n_steps: vec![60],
            t_rsp: None,
            dt: TRSP_DT,
            denoise_final: false,
            record_timing: false,
            task: Task::default(),
            metric: None,
        }
    }
}

impl SweepPlan {
    pub fn new(sdes: Vec<SdeSpec>, seed: u64) -> Self {
        Self {
            sdes,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sdes.is_empty() {
            return Err(Error::InvalidSpec("plan has no SDE configurations".into()));
        }
        if self.n_steps.is_empty() || self.n_steps.contains(&0) {
            return Err(Error::InvalidSpec(
                "n_steps must be a nonempty list of positive counts".into(),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if let Some(ts) = &self.t_rsp {
            if ts.is_empty() {
                return Err(Error::InvalidSpec("t_rsp list is empty".into()));
            }
            if ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(Error::InvalidSpec("t_rsp values must be positive".into()));
            }
        }
        match &self.task {
            Task::GaussianToy(cfg) => cfg.validate(),
            Task::WavPair(cfg) => {
                for p in [&cfg.clean, &cfg.noisy, &cfg.estimate] {
                    if !p.is_file() {
                        return Err(Error::InvalidSpec(format!(
                            "{} does not exist",
                            p.display()
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Start times for `spec`: the configured list (values above `T` are
    /// rejected) or `T` followed by `0.91, 0.82, ..., 0.19`.
    pub fn t_rsp_grid(&self, spec: &SdeSpec) -> Result<Vec<f64>> {
        match &self.t_rsp {
            Some(ts) => {
                if let Some(&t) = ts.iter().find(|&&t| t > spec.t_end()) {
                    return Err(Error::InvalidSpec(format!(
                        "t_rsp {t} exceeds T = {} of {}",
                        spec.t_end(),
                        spec.id()
                    )));
                }
                Ok(ts.clone())
            }
            None => Ok(default_t_rsp_grid(spec.t_end())),
        }
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

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            path: None,
            msg: e.to_string(),
        })
    }
}

pub fn default_t_rsp_grid(t_end: f64) -> Vec<f64> {
    let mut out = vec![t_end];
    out.extend(
        (0..9)
            .map(|i| (91 - 9 * i) as f64 / 100.0)
            .filter(|&t| t < t_end),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let g = default_t_rsp_grid(0.999);
        assert_eq!(
            g,
            vec![0.999, 0.91, 0.82, 0.73, 0.64, 0.55, 0.46, 0.37, 0.28, 0.19]
        );
        assert_eq!(default_t_rsp_grid(1.0).len(), 10);
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
            seed = 7
            n_steps = [30, 60]

            [[sde]]
            kind = "BBED"
            c = 0.01

            [[sde]]
            kind = "OUVE"

            [task]
            kind = "gaussian_toy"
            draws = 2
        "#;
        let plan = SweepPlan::from_toml_str(text).unwrap();
        plan.validate().unwrap();
        assert_eq!(plan.sdes[0], SdeSpec::default_bbed(0.01).unwrap());
        assert_eq!(plan.sdes[1], SdeSpec::default_ouve(0.18).unwrap());
        assert_eq!(plan.dt, TRSP_DT);
        match &plan.task {
            Task::GaussianToy(t) => assert_eq!((t.draws, t.frames), (2, 16)),
            _ => panic!(),
        }
        let back = SweepPlan::from_toml_str(&plan.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn validation() {
        assert!(SweepPlan::default().validate().is_err());
        let spec = SdeSpec::default_bbed(0.08).unwrap();
        let mut plan = SweepPlan::new(vec![spec], 0);
        plan.validate().unwrap();
        plan.n_steps = vec![0];
        assert!(plan.validate().is_err());
        plan.n_steps = vec![30];
        plan.t_rsp = Some(vec![0.5, 1.0]);
        plan.validate().unwrap();
        assert!(plan.t_rsp_grid(&spec).is_err());
        plan.task = Task::WavPair(WavPairConfig {
            clean: "/nonexistent/a.wav".into(),
            noisy: "/nonexistent/b.wav".into(),
            estimate: "/nonexistent/c.wav".into(),
        });
        assert!(plan.validate().is_err());
        assert!(SweepPlan::from_toml_str("bogus = 1").is_err());
    }
}
