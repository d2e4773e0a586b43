//! Portable float map codec.
//!
//! Files are written as `PF\n<w> <h>\n-1.0\n` followed by little-endian
//! `f32` samples, bottom row first. Reading accepts either byte order and
//! both the colour (`PF`) and greyscale (`Pf`) variants, and always
//! returns rows top-down.

use std::fs;
use std::path::Path;

use super::HdrImage;
use crate::error::{Error, Result};

/// Raw PFM contents with no sign restriction (normal maps live here).
#[derive(Debug, Clone, PartialEq)]
pub struct PfmData {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Row-major, top row first.
    pub data: Vec<f32>,
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedPfm("unexpected end of header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| Error::MalformedPfm("non-ASCII header".into()))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<PfmData> {
    let mut pos = 0;
    let channels = match next_token(bytes, &mut pos)? {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::MalformedPfm(format!("bad magic {other:?}"))),
    };
    let parse_dim = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| Error::MalformedPfm(format!("bad dimension {s:?}")))
    };
    let width = parse_dim(next_token(bytes, &mut pos)?)?;
    let height = parse_dim(next_token(bytes, &mut pos)?)?;
    let scale_tok = next_token(bytes, &mut pos)?;
    let scale: f32 = scale_tok
        .parse()
        .map_err(|_| Error::MalformedPfm(format!("bad scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedPfm(format!("bad scale {scale_tok:?}")));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::TruncatedPfm {
            expected: width * height * channels * 4,
            found: 0,
        });
    }
    pos += 1;

    let count = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| Error::MalformedPfm("dimensions overflow".into()))?;
    let expected = count * 4;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPfm {
            expected,
            found: payload.len(),
        });
    }
    let little = scale < 0.0;
    let row_len = width * channels;
    let mut data = vec![0f32; count];
    for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let disk_row = i / row_len;
        let col = i % row_len;
        let row = height - 1 - disk_row;
        if !v.is_finite() {
            return Err(Error::NonFiniteSample(row * row_len + col));
        }
        data[row * row_len + col] = v;
    }
    Ok(PfmData {
        width,
        height,
        channels,
        data,
    })
}

pub fn encode_pfm(pfm: &PfmData) -> Vec<u8> {
    let magic = if pfm.channels == 1 { "Pf" } else { "PF" };
    let header = format!("{magic}\n{} {}\n-1.0\n", pfm.width, pfm.height);
    let row_len = pfm.width * pfm.channels;
    let mut out = Vec::with_capacity(header.len() + pfm.data.len() * 4);
    out.extend_from_slice(header.as_bytes());
    for row in pfm.data.chunks_exact(row_len).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm_raw(path: impl AsRef<Path>) -> Result<PfmData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

pub fn write_pfm_raw(pfm: &PfmData, path: impl AsRef<Path>) -> Result<()> {
    assert!(pfm.channels == 1 || pfm.channels == 3);
    assert_eq!(pfm.data.len(), pfm.width * pfm.height * pfm.channels);
    let path = path.as_ref();
    fs::write(path, encode_pfm(pfm)).map_err(|e| Error::io(path, e))
}

/// Reads an RGB radiance image. Greyscale files are replicated into RGB.
pub fn read_pfm(path: impl AsRef<Path>) -> Result<HdrImage> {
    let raw = read_pfm_raw(path)?;
    let data = if raw.channels == 3 {
        raw.data
    } else {
        raw.data.iter().flat_map(|v| [*v; 3]).collect()
    };
    HdrImage::new(raw.width, raw.height, data)
}

pub fn write_pfm(img: &HdrImage, path: impl AsRef<Path>) -> Result<()> {
    write_pfm_raw(
        &PfmData {
            width: img.width(),
            height: img.height(),
            channels: 3,
            data: img.data().to_vec(),
        },
        path,
    )
}
