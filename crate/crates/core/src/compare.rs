//! Spherical Gaussian versus spherical harmonics lighting approximation.

use rand::Rng;
use serde::Serialize;

use crate::brdf::{BrdfConfig, SurfaceSample};
use crate::error::Result;
use crate::lighting::{sh_eval, sh_project, EnvMapGrid, GridDomain, SgEnvironment, DEFAULT_SH_ORDER};
use crate::math::{Rgb, Vec3};
use crate::renderlayer::{build_quadrature, render_pixel};
use crate::sgfit::{fit_grid, log_grid_loss, CellWeighting, SgFitConfig};

/// Roughness of the glossy probe.
pub const PROBE_ROUGHNESS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareConfig {
    pub fit: SgFitConfig,
    pub sh_order: usize,
    /// The probe is a `probe_size × probe_size` patch of normals.
    pub probe_size: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            fit: SgFitConfig::default(),
            sh_order: DEFAULT_SH_ORDER,
            probe_size: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareReport {
    pub sg_log_loss: f64,
    pub sh_log_loss: f64,
    pub sg_render_mse: f64,
    pub sh_render_mse: f64,
}

/// SG fit and SH projection of `grid`, each reconstructed at the grid's cell
/// centres. SH values are clamped at zero.
pub fn reconstructions(grid: &EnvMapGrid, cfg: &CompareConfig) -> Result<(SgEnvironment, EnvMapGrid, EnvMapGrid)> {
    let fit = fit_grid(grid, &cfg.fit)?;
    let sg = crate::lighting::sg_to_grid(&fit.env, grid.rows(), grid.cols(), grid.domain())?;
    let coeffs = sh_project(grid, cfg.sh_order);
    let sh = EnvMapGrid::from_fn(grid.rows(), grid.cols(), grid.domain(), |d| sh_eval(&coeffs, d).map(|v| v.max(0.0)))?;
    Ok((fit.env, sg, sh))
}

/// Normals of the probe patch, tilted up to 60° from `+z`.
fn probe_normals(size: usize) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(size * size);
    for j in 0..size {
        for i in 0..size {
            let u = (i as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            let v = (j as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            let tilt = 60f64.to_radians() * (u * u + v * v).sqrt().min(1.0);
            let phi = v.atan2(u);
            out.push(Vec3::from_spherical(tilt, phi));
        }
    }
    out
}

/// Glossy probe rendered under `light` (nearest-cell lookup), viewed along `+z`.
pub fn render_probe(light: &EnvMapGrid, size: usize) -> Result<Vec<Rgb>> {
    let q = build_quadrature();
    let cfg = BrdfConfig::default();
    probe_normals(size)
        .into_iter()
        .map(|n| {
            let s = SurfaceSample::new([0.5; 3], n, PROBE_ROUGHNESS)?;
            let p = render_pixel(&s, Vec3::Z, light, &q, &cfg);
            Ok([0, 1, 2].map(|c| p.diffuse[c] + p.specular[c]))
        })
        .collect()
}

fn mse(a: &[Rgb], b: &[Rgb]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (0..3).map(|c| (x[c] - y[c]).powi(2)).sum::<f64>()).sum();
    sum / (3 * a.len()) as f64
}

/// Log-encoded lighting loss and probe MSE of both representations.
pub fn compare_sh_sg(grid: &EnvMapGrid, cfg: &CompareConfig) -> Result<CompareReport> {
    let (_, sg, sh) = reconstructions(grid, cfg)?;
    let reference = render_probe(grid, cfg.probe_size)?;
    Ok(CompareReport {
        sg_log_loss: log_grid_loss(&sg, grid, CellWeighting::SolidAngle)?,
        sh_log_loss: log_grid_loss(&sh, grid, CellWeighting::SolidAngle)?,
        sg_render_mse: mse(&render_probe(&sg, cfg.probe_size)?, &reference),
        sh_render_mse: mse(&render_probe(&sh, cfg.probe_size)?, &reference),
    })
}

/// Hemispherical map with one to three narrow sources (`λ ∈ [20, 80]`) over
/// a coloured ambient term.
pub fn procedural_environment(rng: &mut impl Rng, rows: usize, cols: usize) -> Result<EnvMapGrid> {
    let count = rng.random_range(1..=3);
    let sources: Vec<(Vec3, f64, Rgb)> = (0..count)
        .map(|_| {
            let axis = Vec3::from_spherical(rng.random_range(0.0..1.4), rng.random_range(0.0..std::f64::consts::TAU));
            let lambda = rng.random_range(20.0..80.0);
            let peak = rng.random_range(5.0..50.0);
            let tint = [rng.random_range(0.7..1.0), rng.random_range(0.7..1.0), rng.random_range(0.7..1.0)];
            (axis, lambda, tint.map(|t| t * peak))
        })
        .collect();
    let ambient: Rgb = [rng.random_range(0.1..0.5), rng.random_range(0.1..0.5), rng.random_range(0.1..0.5)];
    EnvMapGrid::from_fn(rows, cols, GridDomain::Hemisphere, |d| {
        let mut v = ambient;
        for (axis, lambda, f) in &sources {
            let g = (-lambda * (1.0 - d.dot(*axis))).exp();
            for c in 0..3 {
                v[c] += f[c] * g;
            }
        }
        v
    })
}
