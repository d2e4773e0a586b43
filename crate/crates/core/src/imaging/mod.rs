//! Image value types and file codecs.
//!
//! All images are stored row-major, top row first, with interleaved RGB
//! channels. HDR images hold linear radiance; LDR images hold gamma-encoded
//! values in `[0, 1]`.

mod mask;
mod pfm;
mod png;

pub use mask::{BinaryMask, MaskClass, MaskImage};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, read_pfm_raw, write_pfm, write_pfm_raw, PfmData};
pub use png::{read_png_ldr, read_png_luma, write_png_ldr, write_png_luma};

use crate::error::{Error, Result};
use crate::math::Rgb;

/// Default display gamma.
pub const DEFAULT_GAMMA: f32 = 2.2;

fn check_dims(width: usize, height: usize, len: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidValue(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if len != width * height * channels {
        return Err(Error::DimensionMismatch(format!(
            "{width}x{height}x{channels} image needs {} samples, got {len}",
            width * height * channels
        )));
    }
    Ok(())
}

/// Linear RGB radiance image. Every sample is finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, data.len(), 3)?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        if let Some(i) = data.iter().position(|v| *v < 0.0) {
            return Err(Error::InvalidValue(format!(
                "negative radiance {} at sample {i}",
                data[i]
            )));
        }
        Ok(HdrImage {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        HdrImage {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    /// Builds an image from a per-pixel closure `(x, y) -> rgb`. Negative or
    /// non-finite values are an error.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                let c = f(x, y);
                data.extend(c.iter().map(|&v| v as f32));
            }
        }
        HdrImage::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixel_f64(&self, x: usize, y: usize) -> Rgb {
        let p = self.pixel(x, y);
        [p[0] as f64, p[1] as f64, p[2] as f64]
    }

    /// Overwrites one pixel. Values are clamped to be nonnegative and must be finite.
    pub fn set_pixel(&mut self, x: usize, y: usize, c: [f32; 3]) {
        assert!(c.iter().all(|v| v.is_finite()), "non-finite pixel value");
        let i = (y * self.width + x) * 3;
        for k in 0..3 {
            self.data[i + k] = c[k].max(0.0);
        }
    }

    pub fn same_dims(&self, other: &HdrImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Multiplies every sample by `s >= 0`.
    pub fn scaled(&self, s: f32) -> HdrImage {
        assert!(s >= 0.0 && s.is_finite());
        HdrImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// Gamma-encoded RGB image with all samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl LdrImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, data.len(), 3)?;
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidValue(format!(
                "LDR sample {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(LdrImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Single-channel map such as roughness or depth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ScalarImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, data.len(), 1)?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(ScalarImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        ScalarImage {
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        assert!(v.is_finite());
        self.data[y * self.width + x] = v;
    }
}

/// Decodes gamma-encoded values with the default 2.2 exponent.
pub fn ldr_to_linear(img: &LdrImage) -> HdrImage {
    ldr_to_linear_with_gamma(img, DEFAULT_GAMMA)
}

pub fn ldr_to_linear_with_gamma(img: &LdrImage, gamma: f32) -> HdrImage {
    let data = img.data.iter().map(|v| v.powf(gamma)).collect();
    HdrImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Encodes linear radiance, clamping to `[0, 1]` first.
pub fn linear_to_ldr(img: &HdrImage) -> LdrImage {
    linear_to_ldr_with_gamma(img, DEFAULT_GAMMA)
}

pub fn linear_to_ldr_with_gamma(img: &HdrImage, gamma: f32) -> LdrImage {
    let inv = 1.0 / gamma;
    let data = img
        .data
        .iter()
        .map(|v| v.clamp(0.0, 1.0).powf(inv).clamp(0.0, 1.0))
        .collect();
    LdrImage {
        width: img.width,
        height: img.height,
        data,
    }
}
