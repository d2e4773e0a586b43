use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;

use super::{eval_sg, Radiance, SgEnvironment};
use crate::error::{Error, Result};
use crate::imaging::HdrImage;
use crate::math::{Rgb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridDomain {
    /// Rows span `θ ∈ [0, π/2]`.
    #[default]
    Hemisphere,
    /// Rows span `θ ∈ [0, π]`.
    Sphere,
}

impl GridDomain {
    pub fn theta_extent(self) -> f64 {
        match self {
            GridDomain::Hemisphere => FRAC_PI_2,
            GridDomain::Sphere => PI,
        }
    }
}

/// Radiance sampled at cell centres of a `rows × cols` elevation/azimuth grid.
/// Row 0 is nearest the `+z` pole.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvMapGrid {
    rows: usize,
    cols: usize,
    domain: GridDomain,
    radiance: Vec<Rgb>,
}

impl EnvMapGrid {
    pub fn new(rows: usize, cols: usize, domain: GridDomain, radiance: Vec<Rgb>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidValue(format!("grid dims must be positive, got {rows}x{cols}")));
        }
        if radiance.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} grid with {} cells",
                radiance.len()
            )));
        }
        if let Some(i) = radiance
            .iter()
            .position(|c| c.iter().any(|v| !(v.is_finite() && *v >= 0.0)))
        {
            return Err(Error::InvalidValue(format!("cell {i} radiance {:?} invalid", radiance[i])));
        }
        Ok(EnvMapGrid {
            rows,
            cols,
            domain,
            radiance,
        })
    }

    /// Tabulates `f` at every cell centre.
    pub fn from_fn(rows: usize, cols: usize, domain: GridDomain, f: impl Fn(Vec3) -> Rgb + Sync) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidValue(format!("grid dims must be positive, got {rows}x{cols}")));
        }
        let radiance = (0..rows * cols)
            .into_par_iter()
            .map(|i| f(cell_direction(rows, cols, domain, i / cols, i % cols)))
            .collect();
        EnvMapGrid::new(rows, cols, domain, radiance)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn cells(&self) -> &[Rgb] {
        &self.radiance
    }

    pub fn at(&self, r: usize, c: usize) -> Rgb {
        self.radiance[r * self.cols + c]
    }

    pub fn delta_theta(&self) -> f64 {
        self.domain.theta_extent() / self.rows as f64
    }

    pub fn delta_phi(&self) -> f64 {
        TAU / self.cols as f64
    }

    pub fn theta(&self, r: usize) -> f64 {
        (r as f64 + 0.5) * self.delta_theta()
    }

    /// `sin θ · Δθ · Δφ` for cells in row `r`.
    pub fn solid_angle(&self, r: usize) -> f64 {
        self.theta(r).sin() * self.delta_theta() * self.delta_phi()
    }

    /// Cell-centre direction without bounds checking beyond debug asserts.
    pub fn direction(&self, r: usize, c: usize) -> Vec3 {
        debug_assert!(r < self.rows && c < self.cols);
        cell_direction(self.rows, self.cols, self.domain, r, c)
    }

    /// Nearest-cell lookup; directions outside the domain return zero.
    pub fn lookup(&self, dir: Vec3) -> Rgb {
        let (theta, phi) = dir.to_spherical();
        if theta > self.domain.theta_extent() {
            return [0.0; 3];
        }
        let r = ((theta / self.delta_theta()) as usize).min(self.rows - 1);
        let c = ((phi / self.delta_phi()) as usize).min(self.cols - 1);
        self.at(r, c)
    }

    pub fn map(&self, f: impl Fn(Rgb) -> Rgb) -> Result<EnvMapGrid> {
        EnvMapGrid::new(self.rows, self.cols, self.domain, self.radiance.iter().map(|c| f(*c)).collect())
    }

    /// Image with one pixel per cell (width = cols, height = rows).
    pub fn to_image(&self) -> Result<HdrImage> {
        let data = self.radiance.iter().flat_map(|c| c.map(|v| v as f32)).collect();
        HdrImage::new(self.cols, self.rows, data)
    }

    pub fn from_image(img: &HdrImage, domain: GridDomain) -> Result<Self> {
        let radiance = img
            .data()
            .chunks_exact(3)
            .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
            .collect();
        EnvMapGrid::new(img.height(), img.width(), domain, radiance)
    }
}

impl Radiance for EnvMapGrid {
    fn radiance(&self, dir: Vec3) -> Rgb {
        self.lookup(dir)
    }
}

fn cell_direction(rows: usize, cols: usize, domain: GridDomain, r: usize, c: usize) -> Vec3 {
    let theta = (r as f64 + 0.5) * domain.theta_extent() / rows as f64;
    let phi = (c as f64 + 0.5) * TAU / cols as f64;
    Vec3::from_spherical(theta, phi)
}

/// Cell-centre direction with index validation.
pub fn grid_direction(grid: &EnvMapGrid, r: usize, c: usize) -> Result<Vec3> {
    if r >= grid.rows || c >= grid.cols {
        return Err(Error::OutOfRange(format!(
            "cell ({r}, {c}) outside {}x{} grid",
            grid.rows, grid.cols
        )));
    }
    Ok(grid.direction(r, c))
}

/// Evaluates `env` at every cell centre.
pub fn sg_to_grid(env: &SgEnvironment, rows: usize, cols: usize, domain: GridDomain) -> Result<EnvMapGrid> {
    EnvMapGrid::from_fn(rows, cols, domain, |d| eval_sg(env, d))
}
