use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::Path;

use super::Radiance;
use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};

pub const MAX_LOBES: usize = 64;

/// One isotropic spherical Gaussian lobe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgLobe {
    /// Unit lobe axis.
    pub axis: Vec3,
    /// Bandwidth; larger is narrower.
    pub sharpness: f64,
    /// RGB peak radiance, reached along `axis`.
    pub intensity: Rgb,
}

impl SgLobe {
    pub fn new(axis: Vec3, sharpness: f64, intensity: Rgb) -> Result<Self> {
        if (axis.length() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidValue(format!("lobe axis {axis:?} is not unit length")));
        }
        if !(sharpness > 0.0 && sharpness.is_finite()) {
            return Err(Error::InvalidValue(format!("lobe sharpness {sharpness} must be positive")));
        }
        if intensity.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidValue(format!("lobe intensity {intensity:?} must be finite and >= 0")));
        }
        Ok(SgLobe {
            axis,
            sharpness,
            intensity,
        })
    }

    /// `exp(-λ (1 - dir·ξ))`, in `(0, 1]`.
    pub fn falloff(&self, dir: Vec3) -> f64 {
        (-self.sharpness * (1.0 - dir.dot(self.axis))).exp()
    }
}

/// Ordered collection of 1 to [`MAX_LOBES`] lobes.
#[derive(Debug, Clone, PartialEq)]
pub struct SgEnvironment {
    lobes: Vec<SgLobe>,
}

impl SgEnvironment {
    pub fn new(lobes: Vec<SgLobe>) -> Result<Self> {
        if lobes.is_empty() || lobes.len() > MAX_LOBES {
            return Err(Error::InvalidValue(format!(
                "environment needs 1..={MAX_LOBES} lobes, got {}",
                lobes.len()
            )));
        }
        Ok(SgEnvironment { lobes })
    }

    pub fn lobes(&self) -> &[SgLobe] {
        &self.lobes
    }

    pub fn len(&self) -> usize {
        self.lobes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lobes.is_empty()
    }

    /// Multiplies every lobe intensity by `s >= 0`.
    pub fn scaled(&self, s: f64) -> SgEnvironment {
        assert!(s >= 0.0 && s.is_finite());
        SgEnvironment {
            lobes: self
                .lobes
                .iter()
                .map(|l| SgLobe {
                    intensity: l.intensity.map(|v| v * s),
                    ..*l
                })
                .collect(),
        }
    }

    /// One line per lobe: `xi_x xi_y xi_z lambda F_r F_g F_b`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in &self.lobes {
            write_lobe_line(&mut out, l);
        }
        out
    }

    /// Parses the format written by [`SgEnvironment::to_text`]. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lobes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            lobes.push(parse_lobe_line(line, i + 1)?);
        }
        SgEnvironment::new(lobes)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SgEnvironment::from_text(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn write_lobe_line(out: &mut String, l: &SgLobe) {
    let _ = writeln!(
        out,
        "{} {} {} {} {} {} {}",
        l.axis.x, l.axis.y, l.axis.z, l.sharpness, l.intensity[0], l.intensity[1], l.intensity[2]
    );
}

pub(crate) fn parse_lobe_line(line: &str, line_no: usize) -> Result<SgLobe> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
    if vals.len() != 7 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 7 numbers, found {}", vals.len()),
        });
    }
    SgLobe::new(
        Vec3::new(vals[0], vals[1], vals[2]),
        vals[3],
        [vals[4], vals[5], vals[6]],
    )
    .map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

/// Radiance of the mixture along `dir`.
pub fn eval_sg(env: &SgEnvironment, dir: Vec3) -> Rgb {
    let mut acc = [0.0; 3];
    for l in &env.lobes {
        let g = l.falloff(dir);
        for c in 0..3 {
            acc[c] += l.intensity[c] * g;
        }
    }
    acc
}

impl Radiance for SgEnvironment {
    fn radiance(&self, dir: Vec3) -> Rgb {
        eval_sg(self, dir)
    }
}

/// Bounded lobe parameters as produced by a `tanh` output layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSgLobe {
    /// Any nonzero vector; only its direction is kept.
    pub axis: Vec3,
    /// In `(-1, 1)`.
    pub sharpness: f64,
    /// Each channel in `(-1, 1)`.
    pub intensity: Rgb,
}

fn open_unit(v: f64) -> bool {
    v > -1.0 && v < 1.0
}

/// Maps bounded parameters to HDR lobes: the axis is normalized and both
/// bandwidth and intensity pass through `tan(π/4 · (x + 1))`.
pub fn raw_to_hdr(raw: &[RawSgLobe]) -> Result<SgEnvironment> {
    let lobes = raw
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let axis = r
                .axis
                .try_normalize()
                .ok_or_else(|| Error::InvalidValue(format!("lobe {k}: zero axis")))?;
            if !open_unit(r.sharpness) || !r.intensity.iter().all(|v| open_unit(*v)) {
                return Err(Error::InvalidValue(format!(
                    "lobe {k}: raw sharpness/intensity must lie strictly inside (-1, 1)"
                )));
            }
            let expand = |x: f64| (FRAC_PI_4 * (x + 1.0)).tan();
            SgLobe::new(axis, expand(r.sharpness), r.intensity.map(expand))
        })
        .collect::<Result<Vec<_>>>()?;
    SgEnvironment::new(lobes)
}
