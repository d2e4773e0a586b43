//! Microfacet BRDF: Lambertian diffuse plus a GGX / Schlick-Smith specular
//! lobe with a spherical-Gaussian Fresnel approximation.
//!
//! Specular reflectance is achromatic and is added to every channel.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};

/// Lower bound applied to `alpha = roughness²` so the distribution stays
/// finite at `roughness = 0`.
pub const ALPHA_FLOOR: f64 = 1e-4;

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub albedo: Rgb,
    pub normal: Vec3,
    pub roughness: f64,
}

impl SurfaceSample {
    pub fn new(albedo: Rgb, normal: Vec3, roughness: f64) -> Result<Self> {
        if albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidValue(format!("albedo {albedo:?} outside [0, 1]")));
        }
        if (normal.length() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidValue(format!("normal {normal:?} is not unit length")));
        }
        if !(0.0..=1.0).contains(&roughness) {
            return Err(Error::InvalidValue(format!("roughness {roughness} outside [0, 1]")));
        }
        Ok(SurfaceSample {
            albedo,
            normal,
            roughness,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingGeometry {
    pub view: Vec3,
    pub light: Vec3,
}

impl ShadingGeometry {
    pub fn new(view: Vec3, light: Vec3) -> Result<Self> {
        for (name, v) in [("view", view), ("light", light)] {
            if (v.length() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidValue(format!("{name} {v:?} is not unit length")));
            }
        }
        Ok(ShadingGeometry { view, light })
    }

    /// Normalized half vector, or `None` when view and light are opposite.
    pub fn half(&self) -> Option<Vec3> {
        (self.view + self.light).try_normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FresnelVariant {
    /// `(1 - F0) · 2^(-(5.55473 x + 6.8316) x)`
    #[default]
    AsWritten,
    /// `F0 + (1 - F0) · 2^(-(5.55473 x + 6.8316) x)`
    WithF0Offset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrdfConfig {
    pub f0: f64,
    pub fresnel: FresnelVariant,
}

impl Default for BrdfConfig {
    fn default() -> Self {
        BrdfConfig {
            f0: 0.05,
            fresnel: FresnelVariant::AsWritten,
        }
    }
}

impl BrdfConfig {
    pub fn new(f0: f64, fresnel: FresnelVariant) -> Result<Self> {
        if !(0.0..=1.0).contains(&f0) {
            return Err(Error::InvalidValue(format!("f0 {f0} outside [0, 1]")));
        }
        Ok(BrdfConfig { f0, fresnel })
    }
}

pub fn eval_diffuse(s: &SurfaceSample) -> Rgb {
    s.albedo.map(|a| a / PI)
}

fn alpha_of(roughness: f64) -> (f64, f64) {
    let a = roughness * roughness;
    if a < ALPHA_FLOOR {
        (ALPHA_FLOOR, 0.0)
    } else {
        (a, 2.0 * roughness)
    }
}

/// GGX normal distribution with `alpha = roughness²`.
pub fn ndf_term(n_dot_h: f64, roughness: f64) -> f64 {
    let (alpha, _) = alpha_of(roughness);
    let a2 = alpha * alpha;
    let c2 = n_dot_h * n_dot_h;
    let t = (1.0 - c2) + c2 * a2;
    a2 / (PI * t * t)
}

/// `(D, dD/dR)`.
fn ndf_with_derivative(n_dot_h: f64, roughness: f64) -> (f64, f64) {
    let (alpha, dalpha) = alpha_of(roughness);
    let a2 = alpha * alpha;
    let c2 = n_dot_h * n_dot_h;
    let t = (1.0 - c2) + c2 * a2;
    let d = a2 / (PI * t * t);
    let dd_dalpha = 2.0 * alpha / (PI * t * t * t) * (t - 2.0 * a2 * c2);
    (d, dd_dalpha * dalpha)
}

pub fn fresnel_term(v_dot_h: f64, cfg: &BrdfConfig) -> f64 {
    let x = v_dot_h;
    let falloff = (1.0 - cfg.f0) * (-(5.55473 * x + 6.8316) * x).exp2();
    match cfg.fresnel {
        FresnelVariant::AsWritten => falloff,
        FresnelVariant::WithF0Offset => cfg.f0 + falloff,
    }
}

fn smith_k(roughness: f64) -> f64 {
    (roughness + 1.0) * (roughness + 1.0) / 8.0
}

fn g1(x: f64, k: f64) -> f64 {
    x / (x * (1.0 - k) + k)
}

/// Separable Schlick-Smith shadowing with `k = (R + 1)² / 8`.
/// Zero for grazing or back-facing directions.
pub fn geometry_term(n_dot_l: f64, n_dot_v: f64, roughness: f64) -> f64 {
    if n_dot_l <= 0.0 || n_dot_v <= 0.0 {
        return 0.0;
    }
    let k = smith_k(roughness);
    g1(n_dot_l, k) * g1(n_dot_v, k)
}

/// `(G, dG/dR)`.
fn geometry_with_derivative(n_dot_l: f64, n_dot_v: f64, roughness: f64) -> (f64, f64) {
    if n_dot_l <= 0.0 || n_dot_v <= 0.0 {
        return (0.0, 0.0);
    }
    let k = smith_k(roughness);
    let dk = (roughness + 1.0) / 4.0;
    let dg1 = |x: f64| {
        let den = x * (1.0 - k) + k;
        -x * (1.0 - x) / (den * den)
    };
    let (gl, gv) = (g1(n_dot_l, k), g1(n_dot_v, k));
    (gl * gv, (dg1(n_dot_l) * gv + gl * dg1(n_dot_v)) * dk)
}

pub fn eval_specular(s: &SurfaceSample, g: &ShadingGeometry, cfg: &BrdfConfig) -> f64 {
    eval_specular_with_derivative(s, g, cfg).0
}

/// Specular reflectance and its derivative with respect to roughness.
pub fn eval_specular_with_derivative(s: &SurfaceSample, g: &ShadingGeometry, cfg: &BrdfConfig) -> (f64, f64) {
    let n_dot_l = s.normal.dot(g.light);
    let n_dot_v = s.normal.dot(g.view);
    if n_dot_l <= 0.0 || n_dot_v <= 0.0 {
        return (0.0, 0.0);
    }
    let Some(h) = g.half() else {
        return (0.0, 0.0);
    };
    let n_dot_h = s.normal.dot(h).clamp(0.0, 1.0);
    let v_dot_h = g.view.dot(h).clamp(0.0, 1.0);
    let (d, dd) = ndf_with_derivative(n_dot_h, s.roughness);
    let (geo, dgeo) = geometry_with_derivative(n_dot_l, n_dot_v, s.roughness);
    let f = fresnel_term(v_dot_h, cfg);
    let denom = 4.0 * n_dot_l * n_dot_v;
    (d * f * geo / denom, f * (dd * geo + d * dgeo) / denom)
}

pub fn eval_full(s: &SurfaceSample, g: &ShadingGeometry, cfg: &BrdfConfig) -> Rgb {
    let fs = eval_specular(s, g, cfg);
    eval_diffuse(s).map(|fd| fd + fs)
}
