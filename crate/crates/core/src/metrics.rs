//! Gain-function decomposition of an enhanced signal, segmental noise
//! attenuation, a segmental-SDR speech proxy, and an adapter for external
//! perceptual metric tools.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::signal::{istft, write_wav, StftConfig, WavFormat, Waveform};
use num_complex::Complex64;

/// Cells with `|Y|` below this fraction of `max |Y|` pass through with gain 1.
pub const GAIN_EPS_REL: f64 = 1e-8;
pub const GAIN_MAX: f64 = 100.0;
/// 32 ms at 16 kHz.
pub const SEGMENT_LEN: usize = 512;
pub const SEGMENT_FLOOR_DB: f64 = -30.0;
pub const SEGMENT_CEIL_DB: f64 = 60.0;
/// Segments with energy below this fraction of the mean are skipped.
pub const SILENCE_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GainFunction {
    values: ComplexGrid,
    /// Cells where the pass-through guard or the magnitude cap applied.
    clamped: Vec<bool>,
}

impl GainFunction {
    pub fn ones(bins: usize, frames: usize) -> Self {
        Self {
            values: ComplexGrid::filled(bins, frames, Complex64::new(1.0, 0.0)),
            clamped: vec![false; bins * frames],
        }
    }

    /// Wraps an explicit gain (e.g. a binary mask). Magnitudes above
    /// [`GAIN_MAX`] are capped.
    pub fn from_values(values: ComplexGrid) -> Result<Self> {
        if let Some(index) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let mut clamped = vec![false; values.len()];
        let values = {
            let mut v = values;
            for (g, c) in v.as_mut_slice().iter_mut().zip(&mut clamped) {
                if g.norm() > GAIN_MAX {
                    *g *= GAIN_MAX / g.norm();
                    *c = true;
                }
            }
            v
        };
        Ok(Self { values, clamped })
    }

    pub fn values(&self) -> &ComplexGrid {
        &self.values
    }

    pub fn clamped(&self) -> &[bool] {
        &self.clamped
    }

    pub fn apply(&self, g: &ComplexGrid) -> Result<ComplexGrid> {
        self.values.zip_map(g, |a, b| a * b)
    }
}

/// `G = s_hat / y` with the guards above.
pub fn gain_function(s_hat: &ComplexGrid, y: &ComplexGrid) -> Result<GainFunction> {
    s_hat.check_same_shape(y)?;
    if let Some(index) = s_hat.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let eps = GAIN_EPS_REL * y.max_abs();
    let mut clamped = vec![false; y.len()];
    let data = s_hat
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .zip(&mut clamped)
        .map(|((&s, &yv), c)| {
            if yv.norm() <= eps {
                *c = true;
                return Complex64::new(1.0, 0.0);
            }
            let g = s / yv;
            let m = g.norm();
            if m > GAIN_MAX {
                *c = true;
                g * (GAIN_MAX / m)
            } else {
                g
            }
        })
        .collect();
    Ok(GainFunction {
        values: ComplexGrid::from_vec(y.bins(), y.frames(), data)?,
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComponents {
    pub s_tilde: Waveform,
    pub n_tilde: Waveform,
}

/// `s~ = istft(G S)`, `n~ = istft(G (Y - S))`, both of `length` samples.
pub fn filtered_components(
    gain: &GainFunction,
    s: &ComplexGrid,
    y: &ComplexGrid,
    cfg: &StftConfig,
    length: usize,
) -> Result<FilteredComponents> {
    s.check_same_shape(y)?;
    gain.values.check_same_shape(s)?;
    let noise = y.lin_comb(1.0, s, -1.0)?;
    Ok(FilteredComponents {
        s_tilde: istft(&gain.apply(s)?, cfg, length)?,
        n_tilde: istft(&gain.apply(&noise)?, cfg, length)?,
    })
}

/// Mean over reference-active segments of the clamped per-segment dB ratio
/// `10 log10(|ref_seg|^2 / |err_seg|^2)`.
fn segmental_ratio(reference: &[f64], err: &[f64], seg_len: usize) -> Result<f64> {
    if seg_len == 0 {
        return Err(Error::InvalidArgument(
            "segment length must be positive".into(),
        ));
    }
    if reference.len() != err.len() {
        return Err(Error::ShapeMismatch {
            left: (reference.len(), 1),
            right: (err.len(), 1),
        });
    }
    let n_seg = reference.len() / seg_len;
    if n_seg == 0 {
        return Err(Error::TooShort {
            len: reference.len(),
            need: seg_len,
        });
    }
    let energy = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let ref_e: Vec<f64> = reference.chunks_exact(seg_len).map(energy).collect();
    let err_e: Vec<f64> = err.chunks_exact(seg_len).map(energy).collect();
    let mean = ref_e.iter().sum::<f64>() / n_seg as f64;
    let mut acc = 0.0;
    let mut used = 0usize;
    for (&r, &e) in ref_e.iter().zip(&err_e) {
        if !(r > SILENCE_REL * mean) {
            continue;
        }
        let db = if e == 0.0 {
            SEGMENT_CEIL_DB
        } else {
            (10.0 * (r / e).log10()).clamp(SEGMENT_FLOOR_DB, SEGMENT_CEIL_DB)
        };
        acc += db;
        used += 1;
    }
    if used == 0 {
        return Err(Error::AllSegmentsSilent);
    }
    Ok(acc / used as f64)
}

/// Segmental noise-to-filtered-noise ratio in dB; higher means more of the
/// noise was removed.
pub fn noise_attenuation(n: &Waveform, n_tilde: &Waveform, seg_len: usize) -> Result<f64> {
    segmental_ratio(n.samples(), n_tilde.samples(), seg_len)
}

/// Segmental SDR of `s_tilde` against `s`.
pub fn segmental_sdr(s_tilde: &Waveform, s: &Waveform, seg_len: usize) -> Result<f64> {
    if s.energy() == 0.0 {
        return Err(Error::Silent("reference"));
    }
    if s_tilde.len() != s.len() {
        return Err(Error::ShapeMismatch {
            left: (s_tilde.len(), 1),
            right: (s.len(), 1),
        });
    }
    let err: Vec<f64> = s
        .samples()
        .iter()
        .zip(s_tilde.samples())
        .map(|(a, b)| a - b)
        .collect();
    segmental_ratio(s.samples(), &err, seg_len)
}

/// Desk-scale stand-in for a perceptual score of the filtered speech:
/// [`segmental_sdr`] with [`SEGMENT_LEN`] segments.
pub fn speech_quality_proxy(s_tilde: &Waveform, s: &Waveform) -> Result<f64> {
    segmental_sdr(s_tilde, s, SEGMENT_LEN)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricAdapterConfig {
    pub executable: Option<PathBuf>,
    /// `{ref}` and `{deg}` are replaced by WAV paths.
    #[serde(default = "default_args")]
    pub args: Vec<String>,
    /// The first capture group (or the whole match) is parsed as the score.
    #[serde(default = "default_pattern")]
    pub stdout_regex: String,
}

fn default_args() -> Vec<String> {
    vec!["{ref}".into(), "{deg}".into()]
}

fn default_pattern() -> String {
    r"([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)".into()
}

impl Default for MetricAdapterConfig {
    fn default() -> Self {
        Self {
            executable: None,
            args: default_args(),
            stdout_regex: default_pattern(),
        }
    }
}

/// Runs an external scoring tool on a (reference, degraded) WAV pair.
/// Calls through one adapter are serialised.
#[derive(Debug)]
pub struct MetricAdapter {
    config: MetricAdapterConfig,
    pattern: Regex,
    lock: Mutex<()>,
}

impl MetricAdapter {
    pub fn new(config: MetricAdapterConfig) -> Result<Self> {
        let pattern = Regex::new(&config.stdout_regex)
            .map_err(|e| Error::InvalidArgument(format!("bad metric regex: {e}")))?;
        Ok(Self {
            config,
            pattern,
            lock: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &MetricAdapterConfig {
        &self.config
    }

    pub fn is_configured(&self) -> bool {
        self.config.executable.is_some()
    }

    fn parse(&self, stdout: &str) -> Result<f64> {
        let caps = self
            .pattern
            .captures(stdout)
            .ok_or_else(|| Error::MetricParse(stdout.trim().to_string()))?;
        let text = caps.get(1).or_else(|| caps.get(0)).unwrap().as_str();
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| Error::MetricParse(text.to_string()))?;
        if !v.is_finite() {
            return Err(Error::MetricParse(text.to_string()));
        }
        Ok(v)
    }
}

pub fn external_metric(
    adapter: &MetricAdapter,
    reference: &Waveform,
    deg: &Waveform,
) -> Result<f64> {
    let exe = adapter
        .config
        .executable
        .as_ref()
        .ok_or_else(|| Error::MetricNotConfigured("no executable set".into()))?;
    if !exe.is_file() {
        return Err(Error::MetricNotConfigured(format!(
            "{} does not exist",
            exe.display()
        )));
    }
    let _guard = adapter.lock.lock().unwrap_or_else(|p| p.into_inner());
    let dir = tempfile::tempdir()?;
    let ref_path = dir.path().join("ref.wav");
    let deg_path = dir.path().join("deg.wav");
    write_wav(&ref_path, reference, WavFormat::Float32)?;
    write_wav(&deg_path, deg, WavFormat::Float32)?;
    let args: Vec<String> = adapter
        .config
        .args
        .iter()
        .map(|a| {
            a.replace("{ref}", &ref_path.to_string_lossy())
                .replace("{deg}", &deg_path.to_string_lossy())
        })
        .collect();
    let out = Command::new(exe)
        .args(&args)
        .output()
        .map_err(|e| Error::MetricTool(format!("{}: {e}", exe.display())))?;
    if !out.status.success() {
        return Err(Error::MetricTool(format!(
            "{} exited with {}: {}",
            exe.display(),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    adapter.parse(&String::from_utf8_lossy(&out.stdout))
}

/// One line of the metric CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub config_id: String,
    pub na_db: f64,
    pub proxy_db: f64,
    pub external: Option<f64>,
}

pub const METRIC_CSV_HEADER: &str = "config_id,na_db,proxy_db,external";

pub fn write_metric_csv<W: Write>(rows: &[MetricRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{METRIC_CSV_HEADER}")?;
    for r in rows {
        let ext = r.external.map(|v| format!("{v:.5e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{:.5e},{:.5e},{}",
            r.config_id, r.na_db, r.proxy_db, ext
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = seeded(seed);
        Waveform::new((0..len).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn identity_gain() {
        let mut rng = seeded(1);
        let y = ComplexGrid::standard_normal(4, 3, &mut rng);
        let g = gain_function(&y, &y).unwrap();
        for v in g.values().as_slice() {
            assert!((v - c64(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_estimate_gives_zero_gain_except_guarded_cells() {
        let mut y = ComplexGrid::standard_normal(4, 3, &mut seeded(1));
        y.set(2, 1, c64(0.0, 0.0));
        let g = gain_function(&ComplexGrid::zeros(4, 3), &y).unwrap();
        for (i, v) in g.values().as_slice().iter().enumerate() {
            if g.clamped()[i] {
                assert_eq!(*v, c64(1.0, 0.0));
            } else {
                assert_eq!(v.norm(), 0.0);
            }
        }
        assert_eq!(g.clamped().iter().filter(|&&c| c).count(), 1);
    }

    #[test]
    fn multiply_back_recovers_estimate() {
        let mut rng = seeded(3);
        let y = ComplexGrid::standard_normal(8, 8, &mut rng);
        let s = ComplexGrid::standard_normal(8, 8, &mut rng);
        let g = gain_function(&s, &y).unwrap();
        let back = g.apply(&y).unwrap();
        for i in 0..y.len() {
            if !g.clamped()[i] {
                let (a, b) = (back.as_slice()[i], s.as_slice()[i]);
                assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn gain_magnitude_is_capped() {
        let y = ComplexGrid::vector(vec![c64(1.0, 0.0), c64(1e-3, 0.0)]).unwrap();
        let s = ComplexGrid::vector(vec![c64(1.0, 0.0), c64(1.0, 1.0)]).unwrap();
        let g = gain_function(&s, &y).unwrap();
        assert!((g.values().as_slice()[1].norm() - GAIN_MAX).abs() < 1e-12);
        assert!(g.clamped()[1] && !g.clamped()[0]);
        assert!(gain_function(&s, &ComplexGrid::zeros(3, 1)).is_err());
    }

    #[test]
    fn attenuation_examples() {
        let n = noise(4096, 0);
        assert!(noise_attenuation(&n, &n, 512).unwrap().abs() < 1e-12);
        let quiet = n.scaled(1.0 / 10f64.sqrt());
        assert!((noise_attenuation(&n, &quiet, 512).unwrap() - 10.0).abs() < 1e-9);
        let zero = Waveform::new(vec![0.0; 4096]).unwrap();
        assert_eq!(noise_attenuation(&n, &zero, 512).unwrap(), SEGMENT_CEIL_DB);
        assert!(matches!(
            noise_attenuation(&zero, &n, 512),
            Err(Error::AllSegmentsSilent)
        ));
        assert!(noise_attenuation(&n, &n, 0).is_err());
        assert!(noise_attenuation(&n, &noise(100, 1), 512).is_err());
    }

    #[test]
    fn attenuation_ignores_silent_segments() {
        let mut x = noise(2048, 0).into_samples();
        for v in &mut x[512..1024] {
            *v = 0.0;
        }
        let n = Waveform::new(x).unwrap();
        // the silent segment would contribute the ceiling if it were counted
        let na = noise_attenuation(&n, &n.scaled(0.1), 512).unwrap();
        assert!((na - 20.0).abs() < 1e-9);
    }

    #[test]
    fn proxy_examples() {
        let s = noise(4096, 5);
        assert_eq!(speech_quality_proxy(&s, &s).unwrap(), SEGMENT_CEIL_DB);
        let half = s.scaled(0.5);
        let v = speech_quality_proxy(&half, &s).unwrap();
        assert!((v - 10.0 * 4f64.log10()).abs() < 1e-9);
        let mut last = f64::INFINITY;
        for level in [1e-3, 1e-2, 1e-1] {
            let d = s.add(&noise(4096, 9).scaled(level)).unwrap();
            let v = speech_quality_proxy(&d, &s).unwrap();
            assert!(v.is_finite() && v > 0.0 && v < last);
            last = v;
        }
        let zero = Waveform::new(vec![0.0; 4096]).unwrap();
        assert!(matches!(
            speech_quality_proxy(&s, &zero),
            Err(Error::Silent(_))
        ));
    }

    #[test]
    fn unconfigured_adapter() {
        let a = MetricAdapter::new(MetricAdapterConfig::default()).unwrap();
        let w = noise(1000, 0);
        assert!(matches!(
            external_metric(&a, &w, &w),
            Err(Error::MetricNotConfigured(_))
        ));
        let a = MetricAdapter::new(MetricAdapterConfig {
            executable: Some("/nonexistent/tool".into()),
            ..Default::default()
        })
        .unwrap();
        assert!(matches!(
            external_metric(&a, &w, &w),
            Err(Error::MetricNotConfigured(_))
        ));
    }

    #[test]
    fn parser() {
        let a = MetricAdapter::new(MetricAdapterConfig::default()).unwrap();
        assert_eq!(a.parse("PESQ: 4.5\n").unwrap(), 4.5);
        assert_eq!(a.parse("-1.25e-1").unwrap(), -0.125);
        assert!(matches!(a.parse("n/a"), Err(Error::MetricParse(_))));
        assert!(MetricAdapter::new(MetricAdapterConfig {
            stdout_regex: "(".into(),
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn metric_csv_layout() {
        let rows = vec![MetricRow {
            config_id: "BBED-c0.08".into(),
            na_db: 12.0,
            proxy_db: 7.5,
            external: None,
        }];
        let mut buf = Vec::new();
        write_metric_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "config_id,na_db,proxy_db,external\nBBED-c0.08,1.20000e1,7.50000e0,\n"
        );
    }
}
