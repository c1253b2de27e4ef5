//! Grayscale raster used by every stage of the pipeline.
//!
//! Pixel `(x, y)` has its center at the integer coordinate `(x, y)`; sub-pixel
//! sampling uses the same convention, so a point at `(10.5, 3.0)` lies halfway
//! between columns 10 and 11.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("pixel {index} has value {value}, outside [0, 255]")]
    OutOfRange { index: usize, value: f32 },
    #[error("crop {x}+{width}, {y}+{height} exceeds image bounds")]
    CropBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

/// Row-major luminance image with values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        Self::from_vec(width, height, vec![value; width * height])
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 255.0)
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel, clamping to `[0, 255]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_level(f(x, y)));
            }
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Writes a pixel, clamping the value into `[0, 255]`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        self.data[y * self.width + x] = clamp_level(value);
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Bilinear interpolation at a sub-pixel position. Returns `None` outside
    /// the convex hull of pixel centers.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f32> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y) {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let q = [self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1)];
        let top = q[0] as f64 * (1.0 - fx) + q[1] as f64 * fx;
        let bottom = q[2] as f64 * (1.0 - fx) + q[3] as f64 * fx;
        // keep rounding from stepping outside the neighbourhood range
        let lo = q.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = q.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        Some(((top * (1.0 - fy) + bottom * fy) as f32).clamp(lo, hi))
    }

    /// Bilinear resize with pixel-area alignment (the corners of the two
    /// grids coincide, as in OpenCV's `INTER_LINEAR`).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Self, ImageError> {
        if (width, height) == (self.width, self.height) {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        Self::from_fn(width, height, |x, y| {
            let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
            self.sample_bilinear(src_x, src_y).unwrap_or(0.0)
        })
    }

    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || x + width > self.width || y + height > self.height {
            return Err(ImageError::CropBounds { x, y, width, height });
        }
        let mut data = Vec::with_capacity(width * height);
        for row in y..y + height {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(Self { width, height, data })
    }

    /// True when every pixel is exactly 0 or 255.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 255.0)
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| clamp_level(f(v))).collect(),
        }
    }
}

#[inline]
pub(crate) fn clamp_level(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 255.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(matches!(
            GrayImage::from_vec(0, 3, vec![]),
            Err(ImageError::EmptyDimensions { .. })
        ));
        assert!(matches!(
            GrayImage::from_vec(2, 2, vec![0.0; 3]),
            Err(ImageError::BufferSize { .. })
        ));
        assert!(matches!(
            GrayImage::from_vec(1, 1, vec![256.0]),
            Err(ImageError::OutOfRange { .. })
        ));
        assert!(GrayImage::from_vec(1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn bilinear_midpoint() {
        let img = GrayImage::from_vec(2, 2, vec![0.0, 100.0, 100.0, 200.0]).unwrap();
        assert_eq!(img.sample_bilinear(0.5, 0.5), Some(100.0));
        assert_eq!(img.sample_bilinear(1.0, 1.0), Some(200.0));
        assert_eq!(img.sample_bilinear(1.01, 0.0), None);
    }

    #[test]
    fn resize_constant_is_constant() {
        let img = GrayImage::filled(7, 5, 42.0).unwrap();
        let big = img.resize_bilinear(20, 13).unwrap();
        assert!(big.pixels().iter().all(|&v| (v - 42.0).abs() < 1e-4));
    }

    #[test]
    fn crop_copies_window() {
        let img = GrayImage::from_fn(4, 4, |x, y| (y * 4 + x) as f32).unwrap();
        let c = img.crop(1, 2, 2, 2).unwrap();
        assert_eq!(c.pixels(), &[9.0, 10.0, 13.0, 14.0]);
        assert!(img.crop(3, 3, 2, 1).is_err());
    }
}
