//! Ratio-image object insertion and material editing.

use rayon::prelude::*;

use crate::brdf::{BrdfConfig, SurfaceSample};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, HdrImage, ScalarImage};
use crate::lighting::{sg_to_grid, EnvMapGrid, GridDomain, Radiance};
use crate::math::{Rgb, Vec3};
use crate::renderlayer::{render_image, render_pixel, Camera, GBuffer, HemisphereQuadrature, LightingGrid};

/// Lower bound on the plane-only render when forming `I_all / I_pl`.
pub const RATIO_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct InsertionSetup {
    /// The photograph `I`.
    pub original: HdrImage,
    /// Render of plane plus object, `I_all`.
    pub with_object: HdrImage,
    /// Render of the plane alone, `I_pl`.
    pub plane_only: HdrImage,
    /// Pixels covered by the object.
    pub object_mask: BinaryMask,
    /// Pixels covered by the object or the plane.
    pub combined_mask: BinaryMask,
}

impl InsertionSetup {
    pub fn new(
        original: HdrImage,
        with_object: HdrImage,
        plane_only: HdrImage,
        object_mask: BinaryMask,
        combined_mask: BinaryMask,
    ) -> Result<Self> {
        let (w, h) = (original.width(), original.height());
        let same = |i: &HdrImage| (i.width(), i.height()) == (w, h);
        let same_mask = |m: &BinaryMask| (m.width(), m.height()) == (w, h);
        if !(same(&with_object) && same(&plane_only) && same_mask(&object_mask) && same_mask(&combined_mask)) {
            return Err(Error::DimensionMismatch(format!("insertion layers disagree with {w}x{h} image")));
        }
        if !object_mask.is_subset_of(&combined_mask) {
            return Err(Error::InvalidValue("object mask must lie inside the combined mask".into()));
        }
        Ok(InsertionSetup {
            original,
            with_object,
            plane_only,
            object_mask,
            combined_mask,
        })
    }
}

/// Object pixels take `I_all`; the rest of the plane takes
/// `I · I_all / max(I_pl, floor)`; everything else is copied from `I`.
pub fn ratio_composite(setup: &InsertionSetup) -> HdrImage {
    let mut out = setup.original.clone();
    for y in 0..out.height() {
        for x in 0..out.width() {
            if setup.object_mask.get(x, y) {
                out.set_pixel(x, y, setup.with_object.pixel(x, y));
            } else if setup.combined_mask.get(x, y) {
                let (i, all, pl) = (
                    setup.original.pixel_f64(x, y),
                    setup.with_object.pixel_f64(x, y),
                    setup.plane_only.pixel_f64(x, y),
                );
                out.set_pixel(x, y, [0, 1, 2].map(|c| (i[c] * all[c] / pl[c].max(RATIO_FLOOR)) as f32));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereObject {
    /// Zero means no object.
    pub radius: f64,
    pub albedo: Rgb,
    pub roughness: f64,
}

#[derive(Debug, Clone)]
pub struct InsertionConfig {
    pub camera: Camera,
    pub brdf: BrdfConfig,
    /// Integration table for every rendered pixel.
    pub quadrature: HemisphereQuadrature,
    /// Resolution of the environment expanded from the insertion point's lobes.
    pub env_rows: usize,
    pub env_cols: usize,
}

impl Default for InsertionConfig {
    fn default() -> Self {
        InsertionConfig {
            camera: Camera::default(),
            brdf: BrdfConfig::default(),
            quadrature: crate::renderlayer::build_quadrature(),
            env_rows: 512,
            env_cols: 1024,
        }
    }
}

fn ray_sphere(origin: Vec3, dir: Vec3, centre: Vec3, radius: f64) -> Option<f64> {
    let oc = origin - centre;
    let b = oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    [-b - sq, -b + sq].into_iter().find(|t| *t > 1e-9)
}

/// Environment seen from a plane point with a sphere blocking some directions.
struct SphereOccluded<'a> {
    env: &'a EnvMapGrid,
    origin: Vec3,
    centre: Vec3,
    radius: f64,
}

impl Radiance for SphereOccluded<'_> {
    fn radiance(&self, dir: Vec3) -> Rgb {
        if ray_sphere(self.origin, dir, self.centre, self.radius).is_some() {
            [0.0; 3]
        } else {
            self.env.lookup(dir)
        }
    }
}

/// Environment seen from the sphere, with the supporting plane blocking the
/// half space below it.
struct PlaneOccluded<'a> {
    env: &'a EnvMapGrid,
    plane_normal: Vec3,
}

impl Radiance for PlaneOccluded<'_> {
    fn radiance(&self, dir: Vec3) -> Rgb {
        if dir.dot(self.plane_normal) < 0.0 {
            [0.0; 3]
        } else {
            self.env.lookup(dir)
        }
    }
}

/// Renders and masks of one insertion, before compositing.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertionRender {
    pub setup: InsertionSetup,
    pub composite: HdrImage,
}

/// Inserts a sphere resting on the plane at pixel `at`.
///
/// The plane's orientation and material come from the G-buffer at `at`, and
/// its lighting is that pixel's lighting cell expanded to a full-sphere grid.
/// Plane pixels are those in `plane_mask` whose camera ray meets the plane.
pub fn insert_object(
    g: &GBuffer,
    lights: &LightingGrid,
    plane_mask: &BinaryMask,
    at: (usize, usize),
    object: &SphereObject,
    image: &HdrImage,
    cfg: &InsertionConfig,
) -> Result<InsertionRender> {
    let (w, h) = (g.width(), g.height());
    if (image.width(), image.height()) != (w, h) || (plane_mask.width(), plane_mask.height()) != (w, h) {
        return Err(Error::DimensionMismatch(format!("image, mask and {w}x{h} G-buffer disagree")));
    }
    let (ax, ay) = at;
    if ax >= w || ay >= h || !plane_mask.get(ax, ay) {
        return Err(Error::OutOfRange(format!("insertion point ({ax}, {ay}) is not on the plane")));
    }
    if !(object.radius >= 0.0 && object.radius.is_finite()) {
        return Err(Error::InvalidValue(format!("sphere radius {} must be finite and >= 0", object.radius)));
    }
    let object_material = SurfaceSample::new(object.albedo, Vec3::Z, object.roughness)?;
    let plane = g.sample(ax, ay)?;
    let cam = &cfg.camera;
    let anchor = cam.unproject(ax as f64, ay as f64, g.depth.get(ax, ay) as f64, w, h);
    let centre = anchor + plane.normal * object.radius;

    let stride = lights.stride(w, h)?;
    let env = sg_to_grid(lights.for_pixel(ax, ay, stride), cfg.env_rows, cfg.env_cols, GridDomain::Sphere)?;

    enum Hit {
        Miss,
        Plane(Rgb, Rgb),
        Object(Rgb),
    }
    let hits: Vec<Hit> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let ray = cam.ray(x as f64, y as f64, w, h);
            let view = -ray;
            let t_sphere = if object.radius > 0.0 {
                ray_sphere(Vec3::ZERO, ray, centre, object.radius)
            } else {
                None
            };
            if let Some(t) = t_sphere {
                let p = ray * t;
                let s = SurfaceSample {
                    normal: (p - centre).normalize(),
                    ..object_material
                };
                let lit = PlaneOccluded {
                    env: &env,
                    plane_normal: plane.normal,
                };
                let r = render_pixel(&s, view, &lit, &cfg.quadrature, &cfg.brdf);
                return Hit::Object([0, 1, 2].map(|c| r.diffuse[c] + r.specular[c]));
            }
            if !plane_mask.get(x, y) {
                return Hit::Miss;
            }
            let denom = ray.dot(plane.normal);
            if denom.abs() < 1e-12 {
                return Hit::Miss;
            }
            let t = anchor.dot(plane.normal) / denom;
            if t <= 0.0 {
                return Hit::Miss;
            }
            let p = ray * t;
            let total = |r: crate::renderlayer::PixelShading| [0, 1, 2].map(|c| r.diffuse[c] + r.specular[c]);
            let bare = total(render_pixel(&plane, view, &env, &cfg.quadrature, &cfg.brdf));
            let shadowed = if object.radius > 0.0 {
                let occ = SphereOccluded {
                    env: &env,
                    origin: p,
                    centre,
                    radius: object.radius,
                };
                total(render_pixel(&plane, view, &occ, &cfg.quadrature, &cfg.brdf))
            } else {
                bare
            };
            Hit::Plane(shadowed, bare)
        })
        .collect();

    let mut with_object = HdrImage::zeros(w, h);
    let mut plane_only = HdrImage::zeros(w, h);
    let mut object_mask = BinaryMask::filled(w, h, false);
    let mut combined_mask = BinaryMask::filled(w, h, false);
    for (i, hit) in hits.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        match hit {
            Hit::Miss => {}
            Hit::Plane(all, pl) => {
                with_object.set_pixel(x, y, all.map(|v| v as f32));
                plane_only.set_pixel(x, y, pl.map(|v| v as f32));
                combined_mask.set(x, y, true);
            }
            Hit::Object(all) => {
                with_object.set_pixel(x, y, all.map(|v| v as f32));
                object_mask.set(x, y, true);
                combined_mask.set(x, y, true);
            }
        }
    }
    let setup = InsertionSetup::new(image.clone(), with_object, plane_only, object_mask, combined_mask)?;
    let composite = ratio_composite(&setup);
    Ok(InsertionRender { setup, composite })
}

/// Replacement material; unset fields keep the G-buffer value. Textures are
/// tiled over the image by pixel coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialEdit {
    pub albedo: Option<Rgb>,
    pub roughness: Option<f64>,
    pub albedo_texture: Option<HdrImage>,
    pub roughness_texture: Option<ScalarImage>,
}

impl MaterialEdit {
    /// G-buffer with the edit applied inside `region`.
    pub fn apply(&self, g: &GBuffer, region: &BinaryMask) -> Result<GBuffer> {
        let mut out = g.clone();
        for y in 0..g.height() {
            for x in 0..g.width() {
                if !region.get(x, y) {
                    continue;
                }
                if let Some(t) = &self.albedo_texture {
                    out.albedo.set_pixel(x, y, t.pixel(x % t.width(), y % t.height()));
                } else if let Some(a) = self.albedo {
                    out.albedo.set_pixel(x, y, a.map(|v| v as f32));
                }
                if let Some(t) = &self.roughness_texture {
                    out.roughness.set(x, y, t.get(x % t.width(), y % t.height()));
                } else if let Some(r) = self.roughness {
                    out.roughness.set(x, y, r as f32);
                }
            }
        }
        GBuffer::new(out.albedo, out.normals, out.roughness, out.depth, out.mask)
    }
}

fn check_region(g: &GBuffer, region: &BinaryMask, image: &HdrImage) -> Result<()> {
    let (w, h) = (g.width(), g.height());
    if (region.width(), region.height()) != (w, h) || (image.width(), image.height()) != (w, h) {
        return Err(Error::DimensionMismatch(format!("region, image and {w}x{h} G-buffer disagree")));
    }
    Ok(())
}

/// Renders diffuse plus specular for the pixels of `region` only.
pub fn render_region(
    g: &GBuffer,
    lights: &LightingGrid,
    region: &BinaryMask,
    camera: &Camera,
    q: &HemisphereQuadrature,
    cfg: &BrdfConfig,
) -> Result<HdrImage> {
    let mut masked = g.clone();
    masked.mask = Some(match &g.mask {
        Some(m) => BinaryMask::from_fn(g.width(), g.height(), |x, y| m.get(x, y) && region.get(x, y)),
        None => region.clone(),
    });
    let r = render_image(&masked, lights, camera, q, cfg)?;
    let data = r.diffuse.data().iter().zip(r.specular.data()).map(|(d, s)| d + s).collect();
    HdrImage::new(g.width(), g.height(), data)
}

/// Re-renders `region` with a new material and pastes it over `image`.
#[allow(clippy::too_many_arguments)]
pub fn edit_material(
    g: &GBuffer,
    lights: &LightingGrid,
    region: &BinaryMask,
    edit: &MaterialEdit,
    image: &HdrImage,
    camera: &Camera,
    q: &HemisphereQuadrature,
    cfg: &BrdfConfig,
) -> Result<HdrImage> {
    check_region(g, region, image)?;
    let edited = edit.apply(g, region)?;
    let rendered = render_region(&edited, lights, region, camera, q, cfg)?;
    let mut out = image.clone();
    for y in 0..g.height() {
        for x in 0..g.width() {
            if region.get(x, y) {
                out.set_pixel(x, y, rendered.pixel(x, y));
            }
        }
    }
    Ok(out)
}

/// Adds `render(new R) − render(old R)` to `image` inside `region`,
/// clamping the result at zero.
#[allow(clippy::too_many_arguments)]
pub fn edit_specularity(
    g: &GBuffer,
    lights: &LightingGrid,
    region: &BinaryMask,
    new_roughness: f64,
    image: &HdrImage,
    camera: &Camera,
    q: &HemisphereQuadrature,
    cfg: &BrdfConfig,
) -> Result<HdrImage> {
    check_region(g, region, image)?;
    let edit = MaterialEdit {
        roughness: Some(new_roughness),
        ..MaterialEdit::default()
    };
    let before = render_region(g, lights, region, camera, q, cfg)?;
    let after = render_region(&edit.apply(g, region)?, lights, region, camera, q, cfg)?;
    let mut out = image.clone();
    for y in 0..g.height() {
        for x in 0..g.width() {
            if !region.get(x, y) {
                continue;
            }
            let (i, b, a) = (image.pixel(x, y), before.pixel(x, y), after.pixel(x, y));
            out.set_pixel(x, y, [0, 1, 2].map(|c| (i[c] + (a[c] - b[c])).max(0.0)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lighting::{SgEnvironment, SgLobe};
    use crate::renderlayer::build_quadrature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64) -> HdrImage {
        HdrImage::from_fn(w, h, |_, _| [0; 3].map(|_: i32| rng.random_range(lo..1.0))).unwrap()
    }

    fn setup(rng: &mut ChaCha8Rng, all: HdrImage, pl: HdrImage) -> InsertionSetup {
        let (w, h) = (all.width(), all.height());
        let obj = BinaryMask::from_fn(w, h, |x, y| x == 2 && y == 2);
        let comb = BinaryMask::from_fn(w, h, |x, y| y >= 1 && x >= 1);
        InsertionSetup::new(random_image(rng, w, h, 0.0), all, pl, obj, comb).unwrap()
    }

    #[test]
    fn unit_ratio_is_identity_on_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pl = random_image(&mut rng, 6, 5, 0.01);
        let s = setup(&mut rng, pl.clone(), pl);
        let out = ratio_composite(&s);
        for y in 0..5 {
            for x in 0..6 {
                if s.object_mask.get(x, y) {
                    assert_eq!(out.pixel(x, y), s.with_object.pixel(x, y));
                } else {
                    assert_eq!(out.pixel(x, y), s.original.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn half_ratio_halves_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pl = random_image(&mut rng, 6, 5, 0.01);
        let s = setup(&mut rng, pl.scaled(0.5), pl);
        let out = ratio_composite(&s);
        for y in 0..5 {
            for x in 0..6 {
                let (o, i) = (out.pixel(x, y), s.original.pixel(x, y));
                for c in 0..3 {
                    if s.object_mask.get(x, y) {
                        continue;
                    }
                    let expect = if s.combined_mask.get(x, y) { 0.5 * i[c] } else { i[c] };
                    assert!((o[c] - expect).abs() <= 1e-6 * expect.max(1.0));
                }
            }
        }
    }

    #[test]
    fn ratio_is_scale_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (all, pl) = (random_image(&mut rng, 6, 5, 0.01), random_image(&mut rng, 6, 5, 0.01));
        let s = setup(&mut rng, all.clone(), pl.clone());
        let factor = HdrImage::from_fn(6, 5, |x, y| [1.0 + x as f64, 2.0 + y as f64, 4.0]).unwrap();
        let mul = |a: &HdrImage| {
            HdrImage::from_fn(6, 5, |x, y| {
                let (p, f) = (a.pixel_f64(x, y), factor.pixel_f64(x, y));
                [p[0] * f[0], p[1] * f[1], p[2] * f[2]]
            })
            .unwrap()
        };
        let t = InsertionSetup {
            with_object: mul(&all),
            plane_only: mul(&pl),
            ..s.clone()
        };
        let (a, b) = (ratio_composite(&s), ratio_composite(&t));
        for y in 0..5 {
            for x in 0..6 {
                if s.combined_mask.get(x, y) && !s.object_mask.get(x, y) {
                    for c in 0..3 {
                        let (u, v) = (a.pixel(x, y)[c], b.pixel(x, y)[c]);
                        assert!((u - v).abs() <= 1e-5 * u.abs().max(1e-3));
                    }
                }
            }
        }
    }

    #[test]
    fn setup_requires_nested_masks() {
        let img = HdrImage::zeros(2, 2);
        let obj = BinaryMask::filled(2, 2, true);
        let comb = BinaryMask::from_fn(2, 2, |x, _| x == 0);
        assert!(InsertionSetup::new(img.clone(), img.clone(), img.clone(), obj, comb).is_err());
    }

    /// Camera looking at a floor `y = -1` with normal `+y`.
    fn floor_scene(w: usize, h: usize) -> (GBuffer, BinaryMask) {
        let cam = Camera::default();
        let mut g = GBuffer::uniform(w, h, [0.6; 3], Vec3::new(0.0, 1.0, 0.0), 0.8, 1.0).unwrap();
        let mut plane = BinaryMask::filled(w, h, false);
        for y in 0..h {
            for x in 0..w {
                let r = cam.ray(x as f64, y as f64, w, h);
                if r.y < -1e-3 {
                    let t = -1.0 / r.y;
                    g.depth.set(x, y, (-r.z * t) as f32);
                    plane.set(x, y, true);
                } else {
                    g.depth.set(x, y, 100.0);
                }
            }
        }
        (g, plane)
    }

    fn overhead_lights() -> LightingGrid {
        let env = SgEnvironment::new(vec![
            SgLobe::new(Vec3::new(0.0, 1.0, 0.0), 30.0, [20.0; 3]).unwrap(),
            SgLobe::new(Vec3::new(0.0, 1.0, 0.0), 0.5, [0.2; 3]).unwrap(),
        ])
        .unwrap();
        LightingGrid::shared(env)
    }

    fn small_cfg() -> InsertionConfig {
        InsertionConfig {
            quadrature: HemisphereQuadrature::new(32, 16).unwrap(),
            env_rows: 128,
            env_cols: 256,
            ..InsertionConfig::default()
        }
    }

    #[test]
    fn absent_object_is_identity() {
        let (g, plane) = floor_scene(16, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = random_image(&mut rng, 16, 12, 0.0);
        let obj = SphereObject {
            radius: 0.0,
            albedo: [0.8; 3],
            roughness: 0.5,
        };
        let out = insert_object(&g, &overhead_lights(), &plane, (8, 10), &obj, &img, &small_cfg()).unwrap();
        assert_eq!(out.composite, img);
    }

    #[test]
    fn insertion_point_must_be_on_plane() {
        let (g, plane) = floor_scene(16, 12);
        let img = HdrImage::zeros(16, 12);
        let obj = SphereObject {
            radius: 0.2,
            albedo: [0.8; 3],
            roughness: 0.5,
        };
        assert!(insert_object(&g, &overhead_lights(), &plane, (8, 0), &obj, &img, &small_cfg()).is_err());
        assert!(insert_object(&g, &overhead_lights(), &plane, (99, 0), &obj, &img, &small_cfg()).is_err());
    }

    #[test]
    fn sphere_shadows_plane_in_order_of_occlusion() {
        let (w, h) = (32, 24);
        let (g, plane) = floor_scene(w, h);
        let img = HdrImage::from_fn(w, h, |_, _| [0.5; 3]).unwrap();
        let lights = overhead_lights();
        let obj = SphereObject {
            radius: 0.35,
            albedo: [0.9; 3],
            roughness: 1.0,
        };
        let cfg = small_cfg();
        let at = (16, 20);
        let out = insert_object(&g, &lights, &plane, at, &obj, &img, &cfg).unwrap();
        assert!(out.setup.object_mask.count() > 0);

        // a strip of plane pixels on the insertion row, moving away from the sphere
        let strip: Vec<usize> = (0..w).filter(|x| out.setup.combined_mask.get(*x, at.1) && !out.setup.object_mask.get(*x, at.1)).collect();
        let right: Vec<usize> = strip.into_iter().filter(|x| *x > at.0).take(3).collect();
        assert_eq!(right.len(), 3);

        // dense occlusion oracle: lighting-weighted fraction of blocked directions
        let cam = cfg.camera;
        let plane_n = Vec3::new(0.0, 1.0, 0.0);
        let anchor = cam.unproject(at.0 as f64, at.1 as f64, g.depth.get(at.0, at.1) as f64, w, h);
        let centre = anchor + plane_n * obj.radius;
        let dense = HemisphereQuadrature::new(256, 128).unwrap();
        let env = lights.cell(0, 0);
        let (t, b, n) = crate::renderlayer::local_frame(plane_n);
        let occlusion = |x: usize| {
            let r = cam.ray(x as f64, at.1 as f64, w, h);
            let p = r * (anchor.dot(plane_n) / r.dot(plane_n));
            let (mut blocked, mut total) = (0.0, 0.0);
            for (d, wt) in dense.directions().iter().zip(dense.weights()) {
                let dir = t * d.x + b * d.y + n * d.z;
                let l = crate::lighting::eval_sg(env, dir)[0] * wt;
                total += l;
                if ray_sphere(p, dir, centre, obj.radius).is_some() {
                    blocked += l;
                }
            }
            blocked / total
        };
        let occ: Vec<f64> = right.iter().map(|x| occlusion(*x)).collect();
        let val: Vec<f32> = right.iter().map(|x| out.composite.pixel(*x, at.1)[0]).collect();
        assert!(occ[0] > 0.0, "no occlusion at {right:?}: {occ:?}");
        for i in 0..2 {
            assert!(occ[i] >= occ[i + 1], "{occ:?}");
            assert!(val[i] <= val[i + 1], "{val:?}");
        }
        assert!(val[0] < 0.5);
    }

    #[test]
    fn doubling_lights_leaves_plane_unchanged() {
        let (g, plane) = floor_scene(16, 12);
        let img = HdrImage::from_fn(16, 12, |x, y| [0.3 + 0.01 * x as f64, 0.4, 0.2 + 0.02 * y as f64]).unwrap();
        let obj = SphereObject {
            radius: 0.3,
            albedo: [0.9; 3],
            roughness: 0.6,
        };
        let cfg = small_cfg();
        let lights = overhead_lights();
        let doubled = LightingGrid::shared(lights.cell(0, 0).scaled(2.0));
        let a = insert_object(&g, &lights, &plane, (8, 10), &obj, &img, &cfg).unwrap();
        let b = insert_object(&g, &doubled, &plane, (8, 10), &obj, &img, &cfg).unwrap();
        for y in 0..12 {
            for x in 0..16 {
                if a.setup.combined_mask.get(x, y) && !a.setup.object_mask.get(x, y) {
                    assert_eq!(a.composite.pixel(x, y), b.composite.pixel(x, y));
                }
            }
        }
    }

    fn edit_scene() -> (GBuffer, LightingGrid, BinaryMask) {
        let mut g = GBuffer::uniform(8, 6, [0.6, 0.4, 0.3], Vec3::Z, 0.4, 2.0).unwrap();
        for (i, n) in g.normals.iter_mut().enumerate() {
            *n = Vec3::new(0.05 * (i % 8) as f64 - 0.2, 0.03 * (i / 8) as f64, 1.0).normalize();
        }
        let lights = LightingGrid::shared(
            SgEnvironment::new(vec![
                SgLobe::new(Vec3::new(0.3, 0.4, 0.8).normalize(), 12.0, [4.0, 3.0, 2.0]).unwrap(),
                SgLobe::new(Vec3::Z, 0.3, [0.3; 3]).unwrap(),
            ])
            .unwrap(),
        );
        let region = BinaryMask::from_fn(8, 6, |x, y| (2..6).contains(&x) && (1..5).contains(&y));
        (g, lights, region)
    }

    #[test]
    fn material_edit_identity_and_empty_region() {
        let (g, lights, region) = edit_scene();
        let (cam, q, cfg) = (Camera::default(), build_quadrature(), BrdfConfig::default());
        let img = HdrImage::from_fn(8, 6, |_, _| [0.25; 3]).unwrap();
        let out = edit_material(&g, &lights, &region, &MaterialEdit::default(), &img, &cam, &q, &cfg).unwrap();
        let full = render_region(&g, &lights, &BinaryMask::filled(8, 6, true), &cam, &q, &cfg).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let expect = if region.get(x, y) { full.pixel(x, y) } else { img.pixel(x, y) };
                assert_eq!(out.pixel(x, y), expect);
            }
        }
        let empty = BinaryMask::filled(8, 6, false);
        let edit = MaterialEdit {
            albedo: Some([0.1; 3]),
            ..Default::default()
        };
        assert_eq!(edit_material(&g, &lights, &empty, &edit, &img, &cam, &q, &cfg).unwrap(), img);
    }

    #[test]
    fn halving_albedo_halves_diffuse() {
        let (g, lights, region) = edit_scene();
        let (cam, q, cfg) = (Camera::default(), build_quadrature(), BrdfConfig::default());
        let half = MaterialEdit {
            albedo: Some([0.3, 0.2, 0.15]),
            ..Default::default()
        };
        let a = render_image(&g, &lights, &cam, &q, &cfg).unwrap();
        let b = render_image(&half.apply(&g, &region).unwrap(), &lights, &cam, &q, &cfg).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let (da, db) = (a.diffuse.pixel(x, y), b.diffuse.pixel(x, y));
                for c in 0..3 {
                    let expect = if region.get(x, y) { 0.5 * da[c] } else { da[c] };
                    assert!((db[c] - expect).abs() <= 1e-6 * expect);
                }
                assert_eq!(a.specular.pixel(x, y), b.specular.pixel(x, y));
            }
        }
    }

    #[test]
    fn textured_edit_tiles_by_pixel() {
        let (g, _, region) = edit_scene();
        let tex = HdrImage::from_fn(2, 2, |x, y| [0.1 * (x + 2 * y) as f64; 3]).unwrap();
        let edit = MaterialEdit {
            albedo_texture: Some(tex.clone()),
            ..Default::default()
        };
        let out = edit.apply(&g, &region).unwrap();
        assert_eq!(out.albedo.pixel(3, 2), tex.pixel(1, 0));
        assert_eq!(out.albedo.pixel(0, 0), g.albedo.pixel(0, 0));
    }

    #[test]
    fn specularity_edit() {
        let (g, lights, region) = edit_scene();
        let (cam, q, cfg) = (Camera::default(), build_quadrature(), BrdfConfig::default());
        let img = HdrImage::from_fn(8, 6, |x, _| [0.05 * x as f64; 3]).unwrap();
        let same = edit_specularity(&g, &lights, &region, 0.4, &img, &cam, &q, &cfg).unwrap();
        assert_eq!(same, img);
        let glossy = edit_specularity(&g, &lights, &region, 0.15, &img, &cam, &q, &cfg).unwrap();
        assert!(glossy.data().iter().all(|v| *v >= 0.0));
        assert_ne!(glossy, img);
        for y in 0..6 {
            for x in 0..8 {
                if !region.get(x, y) {
                    assert_eq!(glossy.pixel(x, y), img.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn specularity_residual_lives_in_specular_term() {
        // near-constant lighting: the diffuse term cannot depend on roughness
        let (g, _, region) = edit_scene();
        let lights = LightingGrid::shared(SgEnvironment::new(vec![SgLobe::new(Vec3::Z, 1e-3, [1.0; 3]).unwrap()]).unwrap());
        let (cam, q, cfg) = (Camera::default(), build_quadrature(), BrdfConfig::default());
        let edit = MaterialEdit {
            roughness: Some(0.9),
            ..Default::default()
        };
        let a = render_image(&g, &lights, &cam, &q, &cfg).unwrap();
        let b = render_image(&edit.apply(&g, &region).unwrap(), &lights, &cam, &q, &cfg).unwrap();
        assert_eq!(a.diffuse, b.diffuse);
        assert_ne!(a.specular, b.specular);
    }
}
