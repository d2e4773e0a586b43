//! Path checks and image formats chosen by extension.

use std::path::{Path, PathBuf};

use anyhow::Context;
use lumenforge::imaging::{
    ldr_to_linear_with_gamma, linear_to_ldr_with_gamma, read_pfm, read_png_ldr, write_pfm, write_png_ldr, HdrImage,
};
use lumenforge::renderlayer::LightingGrid;

/// Rejected before any work starts; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn require_file(p: &Path, what: &str) -> anyhow::Result<()> {
    if !p.is_file() {
        return Err(usage(format!("{what} `{}` is not a file", p.display())));
    }
    Ok(())
}

pub fn require_dir(p: &Path, what: &str) -> anyhow::Result<()> {
    if !p.is_dir() {
        return Err(usage(format!("{what} `{}` is not a directory", p.display())));
    }
    Ok(())
}

/// The output's parent directory must already exist.
pub fn require_output(p: &Path, what: &str) -> anyhow::Result<()> {
    let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(usage(format!("directory for {what} `{}` does not exist", p.display())));
    }
    if p.is_dir() {
        return Err(usage(format!("{what} `{}` is a directory", p.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pfm,
    Png,
}

pub fn image_format(p: &Path, what: &str) -> anyhow::Result<ImageFormat> {
    match p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pfm") => Ok(ImageFormat::Pfm),
        Some("png") => Ok(ImageFormat::Png),
        _ => Err(usage(format!("{what} `{}` must end in .pfm or .png", p.display()))),
    }
}

/// Linear image from PFM, or from an 8-bit PNG through `gamma`.
pub fn read_image(p: &Path, gamma: f32) -> anyhow::Result<HdrImage> {
    Ok(match image_format(p, "image")? {
        ImageFormat::Pfm => read_pfm(p)?,
        ImageFormat::Png => ldr_to_linear_with_gamma(&read_png_ldr(p)?, gamma),
    })
}

pub fn write_image(img: &HdrImage, p: &Path, gamma: f32) -> anyhow::Result<()> {
    match image_format(p, "output")? {
        ImageFormat::Pfm => write_pfm(img, p)?,
        ImageFormat::Png => write_png_ldr(&linear_to_ldr_with_gamma(img, gamma), p)?,
    }
    Ok(())
}

/// A lighting file, or a directory containing `lights.txt`.
pub fn lights_path(p: &Path) -> anyhow::Result<PathBuf> {
    if p.is_dir() {
        let f = p.join("lights.txt");
        require_file(&f, "lighting file")?;
        Ok(f)
    } else {
        require_file(p, "lighting file")?;
        Ok(p.to_path_buf())
    }
}

pub fn read_lights(p: &Path) -> anyhow::Result<LightingGrid> {
    LightingGrid::read(p).with_context(|| format!("reading lighting from {}", p.display()))
}

pub fn parse_list<const N: usize, T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<[T; N]> {
    let parts: Vec<T> = s
        .split(',')
        .map(|t| t.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("{what} `{s}` is not a list of {N} numbers")))?;
    parts
        .try_into()
        .map_err(|_| usage(format!("{what} `{s}` needs exactly {N} comma-separated values")))
}
