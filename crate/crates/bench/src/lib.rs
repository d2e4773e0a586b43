//! Fixtures shared by the benchmarks.

use lumenforge::lighting::{EnvMapGrid, GridDomain, SgEnvironment, SgLobe};
use lumenforge::math::Vec3;
use lumenforge::renderlayer::{GBuffer, LightingGrid};
use lumenforge::texsynth::{SeamConstraint, SeamProblem, SvbrdfTexture, TexSynthConfig, Window};

/// Deterministic lobes spread over the upper hemisphere.
pub fn environment(lobes: usize) -> SgEnvironment {
    let lobes = (0..lobes)
        .map(|i| {
            let t = i as f64 / lobes.max(1) as f64;
            let phi = t * std::f64::consts::TAU;
            let z = 0.2 + 0.7 * t;
            let r = (1.0 - z * z).sqrt();
            let axis = Vec3::new(r * phi.cos(), r * phi.sin(), z);
            SgLobe::new(axis, 2.0 + 20.0 * t, [1.0 + t, 1.0, 1.0 - 0.5 * t]).expect("valid lobe")
        })
        .collect();
    SgEnvironment::new(lobes).expect("valid environment")
}

/// A tilted plane with varying albedo and roughness lit by `environment(12)`.
pub fn scene(width: usize, height: usize) -> (GBuffer, LightingGrid) {
    let mut g = GBuffer::uniform(width, height, [0.5; 3], Vec3::new(0.0, 0.6, 0.8).normalize(), 0.4, 3.0)
        .expect("valid G-buffer");
    for y in 0..height {
        for x in 0..width {
            let r = 0.1 + 0.8 * (x + y) as f32 / (width + height) as f32;
            g.roughness.set(x, y, r);
        }
    }
    (g, LightingGrid::shared(environment(12)))
}

/// Bright sun over a dim sky.
pub fn sky(rows: usize, cols: usize) -> EnvMapGrid {
    let sun = Vec3::new(0.3, -0.2, 0.93).normalize();
    EnvMapGrid::from_fn(rows, cols, GridDomain::Hemisphere, |d| {
        let v = 0.1 + 15.0 * (80.0 * (d.dot(sun) - 1.0)).exp();
        [v, v, 0.9 * v]
    })
    .expect("valid grid")
}

/// Quasi-periodic texture with some structure for the patch search.
pub fn texture(size: usize) -> SvbrdfTexture {
    SvbrdfTexture::from_fn(size, size, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let h = 0.5 + 0.2 * (fx * 0.31).sin() * (fy * 0.17).cos() + 0.1 * ((fx + 2.0 * fy) * 0.05).sin();
        let n = Vec3::new(0.3 * (fx * 0.31).cos(), 0.2 * (fy * 0.17).sin(), 1.0).normalize();
        ([h, 0.9 * h, 0.7 * h], n, h.clamp(0.0, 1.0))
    })
    .expect("valid texture")
}

/// Vertical-seam problem over a `width`×`height` overlap of two offset crops,
/// with the outer columns pinned as in tiling.
pub fn seam_problem(width: usize, height: usize) -> SeamProblem {
    let tex = texture(2 * width.max(height));
    let crop = |x, y| {
        tex.crop(Window { x, y, width, height }).expect("in bounds")
    };
    let mut p = SeamProblem::from_patches(&crop(0, 0), &crop(width / 2 + 1, height / 3), &TexSynthConfig::default())
        .expect("same size");
    for y in 0..height {
        p.constrain(SeamConstraint::First(0, y)).expect("in bounds");
        p.constrain(SeamConstraint::Second(width - 1, y)).expect("in bounds");
    }
    p
}
