use std::path::Path;

use image::{GrayImage, ImageReader, RgbImage};

use super::{LdrImage, ScalarImage};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<image::DynamicImage> {
    ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))
}

/// Reads an 8-bit image as gamma-encoded RGB in `[0, 1]`. Greyscale inputs
/// are replicated across channels; alpha is dropped.
pub fn read_png_ldr(path: impl AsRef<Path>) -> Result<LdrImage> {
    let rgb = open(path.as_ref())?.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    LdrImage::new(w as usize, h as usize, data)
}

/// Reads an 8-bit image's luminance as a scalar map in `[0, 1]`.
pub fn read_png_luma(path: impl AsRef<Path>) -> Result<ScalarImage> {
    let g = open(path.as_ref())?.to_luma8();
    let (w, h) = g.dimensions();
    let data = g.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    ScalarImage::new(w as usize, h as usize, data)
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_png_ldr(img: &LdrImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: Vec<u8> = img.data().iter().map(|v| quantize(*v)).collect();
    let out = RgbImage::from_raw(img.width() as u32, img.height() as u32, buf)
        .expect("buffer length matches dimensions");
    out.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))
}

/// Writes a scalar map clamped to `[0, 1]` as 8-bit greyscale.
pub fn write_png_luma(img: &ScalarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: Vec<u8> = img.data().iter().map(|v| quantize(*v)).collect();
    let out = GrayImage::from_raw(img.width() as u32, img.height() as u32, buf)
        .expect("buffer length matches dimensions");
    out.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))
}
