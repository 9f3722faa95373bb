//! Dense double-precision pixel grids.

use crate::error::{Error, Result};

/// An `height × width × channels` grid of `f64` samples stored row-major with
/// channels interleaved, i.e. sample `(r, c, ch)` lives at
/// `(r * width + c) * channels + ch`.
///
/// Pixel values are nominally in `[0, 1]`, but transform coefficients and
/// diffusion latents reuse the same container without that restriction.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::shape(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::shape(format!(
                "{height}x{width}x{channels} image needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Single-channel image from a row-major slice of rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::shape("ragged rows"));
        }
        Self::new(height, width, 1, rows.concat())
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty image");
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::zeros(height, width, channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    img.data[(r * width + c) * channels + ch] = f(r, c, ch);
                }
            }
        }
        img
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        self.data[(row * self.width + col) * self.channels + ch] = value;
    }

    /// Same buffer with new contents; `data` must have the same length.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.height, self.width, self.channels, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, ch: usize) -> Self {
        assert!(ch < self.channels, "channel {ch} out of range");
        let data = self
            .data
            .iter()
            .skip(ch)
            .step_by(self.channels)
            .copied()
            .collect();
        Self {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Interleaves single-channel planes of equal size.
    pub fn from_channels(planes: &[Self]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::shape("no channel planes"))?;
        let channels = planes.len();
        let mut data = vec![0.0; first.height * first.width * channels];
        for (ch, plane) in planes.iter().enumerate() {
            if plane.channels != 1 || plane.height != first.height || plane.width != first.width {
                return Err(Error::shape(format!(
                    "channel plane {ch} has shape {:?}, expected ({}, {}, 1)",
                    plane.shape(),
                    first.height,
                    first.width
                )));
            }
            for (i, &v) in plane.data.iter().enumerate() {
                data[i * channels + ch] = v;
            }
        }
        Self::new(first.height, first.width, channels, data)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Largest absolute per-sample difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Mean absolute per-sample difference. Shapes must match.
    pub fn mean_abs_diff(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(ImageBuffer::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(ImageBuffer::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn channel_split_and_merge() {
        let img = ImageBuffer::from_fn(3, 4, 3, |r, c, ch| (r * 100 + c * 10 + ch) as f64);
        let planes: Vec<_> = (0..3).map(|ch| img.channel(ch)).collect();
        assert_eq!(planes[2].get(1, 3, 0), 132.0);
        assert_eq!(ImageBuffer::from_channels(&planes).unwrap(), img);
    }
}
