//! STFT analysis and synthesis, magnitude compression, mixing at a target
//! SNR, and mono WAV I/O.
//!
//! Frames are centred: the input is zero padded by `n_fft / 2` on both sides
//! and frame `k` starts at padded index `k * hop`, so `K = 1 + len / hop`.
//! The forward transform is unnormalised; synthesis is weighted overlap-add
//! divided by the summed squared window.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// A 16 kHz waveform; samples must be finite and nonempty.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooShort { len: 0, need: 1 });
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            samples,
            sample_rate: SAMPLE_RATE,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * a).collect(),
            sample_rate: self.sample_rate,
        }
    }

    fn check_same_len(&self, other: &Waveform) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch {
                left: (self.len(), 1),
                right: (other.len(), 1),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Waveform) -> Result<Self> {
        self.check_same_len(other)?;
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            sample_rate: self.sample_rate,
        })
    }

    pub fn sub(&self, other: &Waveform) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop: usize,
    /// FFT length; `n_fft / 2 + 1` one-sided bins are kept.
    pub n_fft: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_size: 510,
            hop: 128,
            n_fft: 510,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop >= self.window_size {
            return Err(Error::InvalidArgument(format!(
                "hop {} must be in [1, window_size = {})",
                self.hop, self.window_size
            )));
        }
        if self.n_fft < self.window_size {
            return Err(Error::InvalidArgument(format!(
                "n_fft {} is shorter than the window {}",
                self.n_fft, self.window_size
            )));
        }
        // squared-window overlap-add needs every sample covered by a nonzero weight
        if self.window_size < 2 * self.hop {
            return Err(Error::InvalidArgument(
                "window must overlap by at least half for overlap-add".into(),
            ));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn frames_for(&self, len: usize) -> usize {
        1 + len / self.hop
    }

    /// Periodic Hann window of `window_size`, centred in `n_fft`.
    pub fn window(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_fft];
        let off = (self.n_fft - self.window_size) / 2;
        let n = self.window_size as f64;
        for i in 0..self.window_size {
            w[off + i] = 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos();
        }
        w
    }
}

/// Reusable STFT with cached plans and window.
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            window: cfg.window(),
            forward: planner.plan_fft_forward(cfg.n_fft),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
            cfg,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn analyze(&self, w: &Waveform) -> Result<ComplexGrid> {
        let cfg = &self.cfg;
        if w.len() < cfg.window_size {
            return Err(Error::TooShort {
                len: w.len(),
                need: cfg.window_size,
            });
        }
        let pad = cfg.n_fft / 2;
        let frames = cfg.frames_for(w.len());
        let bins = cfg.bins();
        let x = w.samples();
        let mut data = Vec::with_capacity(bins * frames);
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
        for k in 0..frames {
            let start = (k * cfg.hop) as isize - pad as isize;
            for (i, b) in buf.iter_mut().enumerate() {
                let j = start + i as isize;
                let v = if j >= 0 && (j as usize) < x.len() {
                    x[j as usize]
                } else {
                    0.0
                };
                *b = Complex64::new(v * self.window[i], 0.0);
            }
            self.forward.process(&mut buf);
            data.extend_from_slice(&buf[..bins]);
        }
        ComplexGrid::from_vec(bins, frames, data)
    }

    pub fn synthesize(&self, g: &ComplexGrid, length: usize) -> Result<Waveform> {
        let cfg = &self.cfg;
        let want = (cfg.bins(), cfg.frames_for(length));
        if g.shape() != want {
            return Err(Error::ShapeMismatch {
                left: g.shape(),
                right: want,
            });
        }
        let n_fft = cfg.n_fft;
        let pad = n_fft / 2;
        let total = (g.frames() - 1) * cfg.hop + n_fft;
        let mut out = vec![0.0; total];
        let mut norm = vec![0.0; total];
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        let bins = cfg.bins();
        for k in 0..g.frames() {
            let frame = g.frame(k);
            buf[..bins].copy_from_slice(frame);
            for f in bins..n_fft {
                buf[f] = frame[n_fft - f].conj();
            }
            // imaginary parts at DC and Nyquist have no real-signal counterpart
            buf[0].im = 0.0;
            if n_fft % 2 == 0 {
                buf[n_fft / 2].im = 0.0;
            }
            self.inverse.process(&mut buf);
            let start = k * cfg.hop;
            for i in 0..n_fft {
                let w = self.window[i];
                out[start + i] += w * buf[i].re / n_fft as f64;
                norm[start + i] += w * w;
            }
        }
        let samples = (0..length)
            .map(|i| {
                let j = i + pad;
                if j < total && norm[j] > 1e-10 {
                    out[j] / norm[j]
                } else {
                    0.0
                }
            })
            .collect();
        Waveform::new(samples)
    }
}

pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<ComplexGrid> {
    Stft::new(*cfg)?.analyze(w)
}

pub fn istft(g: &ComplexGrid, cfg: &StftConfig, length: usize) -> Result<Waveform> {
    Stft::new(*cfg)?.synthesize(g, length)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCompression")]
pub struct CompressionConfig {
    beta: f64,
    alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompression {
    beta: f64,
    alpha: f64,
}

impl TryFrom<RawCompression> for CompressionConfig {
    type Error = Error;

    fn try_from(r: RawCompression) -> Result<Self> {
        Self::new(r.beta, r.alpha)
    }
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            beta: 0.15,
            alpha: 0.5,
        }
    }
}

impl CompressionConfig {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need beta > 0 and 0 < alpha <= 1, got beta = {beta}, alpha = {alpha}"
            )));
        }
        Ok(Self { beta, alpha })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `v -> beta |v|^alpha e^{i arg v}`. Scaling `v` by a positive real keeps
/// the phase exact.
pub fn compress(g: &ComplexGrid, cfg: &CompressionConfig) -> ComplexGrid {
    g.map(|v| {
        let m = v.norm();
        if m == 0.0 {
            v
        } else {
            v * (cfg.beta * m.powf(cfg.alpha) / m)
        }
    })
}

/// `u -> (|u| / beta)^{1/alpha} e^{i arg u}`.
pub fn decompress(g: &ComplexGrid, cfg: &CompressionConfig) -> ComplexGrid {
    g.map(|u| {
        let m = u.norm();
        if m == 0.0 {
            u
        } else {
            u * ((m / cfg.beta).powf(1.0 / cfg.alpha) / m)
        }
    })
}

/// Scales `n` so that `10 log10(|s|^2 / |n'|^2) = snr_db` and returns
/// `(s + n', n')`. A longer `n` is cropped at a random offset.
pub fn mix_at_snr<R: Rng + ?Sized>(
    s: &Waveform,
    n: &Waveform,
    snr_db: f64,
    rng: &mut R,
) -> Result<(Waveform, Waveform)> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "SNR must be finite, got {snr_db}"
        )));
    }
    if n.len() < s.len() {
        return Err(Error::TooShort {
            len: n.len(),
            need: s.len(),
        });
    }
    let noise = if n.len() > s.len() {
        let off = rng.random_range(0..=n.len() - s.len());
        Waveform::new(n.samples()[off..off + s.len()].to_vec())?
    } else {
        n.clone()
    };
    let es = s.energy();
    let en = noise.energy();
    if es == 0.0 {
        return Err(Error::Silent("speech"));
    }
    if en == 0.0 {
        return Err(Error::Silent("noise"));
    }
    let gain = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled = noise.scaled(gain);
    Ok((s.add(&scaled)?, scaled))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    #[default]
    Pcm16,
    Float32,
}

/// Reads a mono 16 kHz file stored as 16-bit PCM or 32-bit float.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.sample_rate != SAMPLE_RATE {
        return Err(Error::InvalidArgument(format!(
            "{}: expected mono {SAMPLE_RATE} Hz, got {} channel(s) at {} Hz",
            path.display(),
            spec.channels,
            spec.sample_rate
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported sample format {fmt:?} with {bits} bits",
                path.display()
            )))
        }
    };
    Waveform::new(samples)
}

/// PCM16 output clips to the representable range.
pub fn write_wav(path: &Path, w: &Waveform, format: WavFormat) -> Result<()> {
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, hound::SampleFormat::Int),
        WavFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &v in w.samples() {
        match format {
            WavFormat::Pcm16 => {
                let q = (v * 32768.0)
                    .round()
                    .clamp(i16::MIN as f64, i16::MAX as f64);
                writer.write_sample(q as i16)?;
            }
            WavFormat::Float32 => writer.write_sample(v as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}
