//! Complex coefficient grids.
//!
//! A [`ComplexGrid`] holds `bins x frames` complex values stored frame-major,
//! i.e. the spectrum of one STFT frame is contiguous. Vectors of `d`
//! coefficients are represented as a `(d, 1)` grid.

use std::io::Write;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::complex_normal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    bins: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(bins: usize, frames: usize) -> Self {
        Self {
            bins,
            frames,
            data: vec![Complex64::new(0.0, 0.0); bins * frames],
        }
    }

    pub fn filled(bins: usize, frames: usize, value: Complex64) -> Self {
        Self {
            bins,
            frames,
            data: vec![value; bins * frames],
        }
    }

    /// Builds a grid from frame-major data. Rejects non-finite entries.
    pub fn from_vec(bins: usize, frames: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != bins * frames {
            return Err(Error::InvalidArgument(format!(
                "grid data has {} values, shape ({bins}, {frames}) needs {}",
                data.len(),
                bins * frames
            )));
        }
        if let Some(index) = data
            .iter()
            .position(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { bins, frames, data })
    }

    /// A flattened `(d, 1)` grid.
    pub fn vector(data: Vec<Complex64>) -> Result<Self> {
        let d = data.len();
        Self::from_vec(d, 1, data)
    }

    pub fn scalar(value: Complex64) -> Self {
        Self {
            bins: 1,
            frames: 1,
            data: vec![value],
        }
    }

    /// Circularly-symmetric standard complex normal draws, `E|z|^2 = 1`.
    pub fn standard_normal<R: Rng + ?Sized>(bins: usize, frames: usize, rng: &mut R) -> Self {
        let data = (0..bins * frames).map(|_| complex_normal(rng)).collect();
        Self { bins, frames, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.bins, self.frames)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    pub fn set(&mut self, bin: usize, frame: usize, value: Complex64) {
        self.data[frame * self.bins + bin] = value;
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, frame: usize) -> &mut [Complex64] {
        &mut self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn check_same_shape(&self, other: &ComplexGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            bins: self.bins,
            frames: self.frames,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two equally shaped grids.
    pub fn zip_map(
        &self,
        other: &ComplexGrid,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            bins: self.bins,
            frames: self.frames,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &ComplexGrid, b: f64) -> Result<Self> {
        self.zip_map(other, |x, y| x * a + y * b)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Writes `bin,frame,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin,frame,re,im")?;
        for frame in 0..self.frames {
            for bin in 0..self.bins {
                let v = self.get(bin, frame);
                writeln!(w, "{bin},{frame},{:e},{:e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

impl Add for &ComplexGrid {
    type Output = ComplexGrid;

    /// Panics on shape mismatch; use [`ComplexGrid::zip_map`] for a checked version.
    fn add(self, rhs: &ComplexGrid) -> ComplexGrid {
        self.zip_map(rhs, |a, b| a + b).expect("grid shapes differ")
    }
}

impl Sub for &ComplexGrid {
    type Output = ComplexGrid;

    fn sub(self, rhs: &ComplexGrid) -> ComplexGrid {
        self.zip_map(rhs, |a, b| a - b).expect("grid shapes differ")
    }
}

impl Mul<f64> for &ComplexGrid {
    type Output = ComplexGrid;

    fn mul(self, rhs: f64) -> ComplexGrid {
        self.scale(rhs)
    }
}
