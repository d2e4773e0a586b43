//! Segmentation and binary masks.
//!
//! A segmentation mask PNG stores one class per pixel in its RGB channels:
//! red = object, green = area light, blue = environment. A channel counts as
//! set when its 8-bit value is at least 128, and exactly one channel must be
//! set per pixel. Binary masks are single-channel PNGs thresholded the same way.

use std::path::Path;

use image::{GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskClass {
    Object,
    AreaLight,
    Environment,
}

impl MaskClass {
    pub const ALL: [MaskClass; 3] = [MaskClass::Object, MaskClass::AreaLight, MaskClass::Environment];

    fn channel(self) -> usize {
        match self {
            MaskClass::Object => 0,
            MaskClass::AreaLight => 1,
            MaskClass::Environment => 2,
        }
    }
}

/// Three-way per-pixel segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    classes: Vec<MaskClass>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize, classes: Vec<MaskClass>) -> Result<Self> {
        if width == 0 || height == 0 || classes.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} mask with {} labels",
                classes.len()
            )));
        }
        Ok(MaskImage {
            width,
            height,
            classes,
        })
    }

    pub fn filled(width: usize, height: usize, class: MaskClass) -> Self {
        MaskImage::new(width, height, vec![class; width * height]).expect("positive dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn class_at(&self, x: usize, y: usize) -> MaskClass {
        self.classes[y * self.width + x]
    }

    /// Binary indicator for one class.
    pub fn channel(&self, class: MaskClass) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.classes.iter().map(|c| *c == class).collect(),
        }
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rgb = ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::Png(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = rgb.dimensions();
        let mut classes = Vec::with_capacity((w * h) as usize);
        for (i, px) in rgb.pixels().enumerate() {
            let set: Vec<MaskClass> = MaskClass::ALL
                .iter()
                .copied()
                .filter(|c| px.0[c.channel()] >= 128)
                .collect();
            if set.len() != 1 {
                return Err(Error::InvalidValue(format!(
                    "mask pixel {i} has {} classes set, expected exactly one",
                    set.len()
                )));
            }
            classes.push(set[0]);
        }
        MaskImage::new(w as usize, h as usize, classes)
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = vec![0u8; self.classes.len() * 3];
        for (i, c) in self.classes.iter().enumerate() {
            buf[i * 3 + c.channel()] = 255;
        }
        RgbImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches")
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Png(format!("{}: {e}", path.display())))
    }
}

/// Per-pixel boolean mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} mask with {} entries",
                data.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        BinaryMask::new(width, height, vec![value; width * height]).expect("positive dims")
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        BinaryMask::new(width, height, data).expect("positive dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|v| *v)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{} masks",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let g = ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::Png(format!("{}: {e}", path.display())))?
            .to_luma8();
        let (w, h) = g.dimensions();
        BinaryMask::new(w as usize, h as usize, g.pixels().map(|p| p.0[0] >= 128).collect())
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf = self.data.iter().map(|v| if *v { 255 } else { 0 }).collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches")
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Png(format!("{}: {e}", path.display())))
    }
}
