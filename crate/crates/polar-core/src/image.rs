//! Row-major float image container used for every map in the pipeline
//! (intensity, Stokes channels, depth, normals, masks-as-floats).
//!
//! Samples are stored as f64 in memory; file formats quantize at the I/O
//! boundary (PFM is 32-bit by definition, PNG is 16-bit).

use crate::error::CoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_data(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, CoreError> {
        if data.len() != width * height * channels {
            return Err(CoreError::Dimension(format!(
                "expected {} samples for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(CoreError::Data("non-finite sample".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_size(&self, other: &FloatImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn same_shape(&self, other: &FloatImage) -> bool {
        self.same_size(other) && self.channels == other.channels
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// All channels at one pixel.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Bilinear sample of one channel at continuous pixel coordinates.
    /// Returns None when the 2x2 support leaves the image.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let x0 = x.floor();
        let y0 = y.floor();
        let x1 = x0 + 1.0;
        let y1 = y0 + 1.0;
        if x1 as usize >= self.width || y1 as usize >= self.height {
            // Allow exact sampling on the last row/column.
            if x0 as usize == self.width - 1 && x == x0 || y0 as usize == self.height - 1 && y == y0
            {
                let xi = (x.floor() as usize).min(self.width - 1);
                let yi = (y.floor() as usize).min(self.height - 1);
                if x == xi as f64 && y == yi as f64 {
                    return Some(self.get(xi, yi, c));
                }
            }
            return None;
        }
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0, x1, y1) = (x0 as usize, y0 as usize, x1 as usize, y1 as usize);
        let v00 = self.get(x0, y0, c);
        let v10 = self.get(x1, y0, c);
        let v01 = self.get(x0, y1, c);
        let v11 = self.get(x1, y1, c);
        Some(v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy)
    }

    /// Mean of all channels at a pixel.
    #[inline]
    pub fn luminance(&self, x: usize, y: usize) -> f64 {
        let p = self.pixel(x, y);
        p.iter().sum::<f64>() / p.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Binary image stored as booleans, same indexing as [`FloatImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn same_size(&self, other: &BinaryImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn and(&self, other: &BinaryImage) -> BinaryImage {
        assert!(self.same_size(other));
        BinaryImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    pub fn or(&self, other: &BinaryImage) -> BinaryImage {
        assert!(self.same_size(other));
        BinaryImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a || b)
                .collect(),
        }
    }

    pub fn not(&self) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&a| !a).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_data_rejects_bad_count() {
        assert!(FloatImage::from_data(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(FloatImage::from_data(2, 2, 1, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn from_data_rejects_nan() {
        assert!(FloatImage::from_data(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn bilinear_matches_corners() {
        let img = FloatImage::from_data(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(img.sample_bilinear(0.0, 0.0, 0), Some(1.0));
        assert_eq!(img.sample_bilinear(0.5, 0.5, 0), Some(2.5));
        assert_eq!(img.sample_bilinear(-0.1, 0.0, 0), None);
    }
}
