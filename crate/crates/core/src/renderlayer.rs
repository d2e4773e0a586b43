//! Hemisphere-quadrature rendering of the microfacet BRDF under per-pixel
//! lighting, with analytic gradients.
//!
//! Quadrature directions live in each pixel's local shading frame and are
//! rotated into the camera frame, where lighting is expressed.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::brdf::{eval_diffuse, eval_specular, eval_specular_with_derivative, BrdfConfig, ShadingGeometry, SurfaceSample};
use crate::error::{Error, Result};
use crate::imaging::{read_pfm, read_pfm_raw, write_pfm, write_pfm_raw, BinaryMask, HdrImage, PfmData, ScalarImage};
use crate::lighting::{parse_lobe_line, write_lobe_line, Radiance, SgEnvironment};
use crate::math::{Rgb, Vec3};

/// Midpoint rule over the upper hemisphere of the local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HemisphereQuadrature {
    azimuth_bins: usize,
    elevation_bins: usize,
    directions: Vec<Vec3>,
    solid_angles: Vec<f64>,
    /// `cos θ · dω` per sample.
    weights: Vec<f64>,
}

impl HemisphereQuadrature {
    /// `θ_j = (j + ½)(π/2)/elevation_bins`, `φ_i = (i + ½)·2π/azimuth_bins`.
    pub fn new(azimuth_bins: usize, elevation_bins: usize) -> Result<Self> {
        if azimuth_bins == 0 || elevation_bins == 0 {
            return Err(Error::InvalidValue(format!(
                "quadrature needs positive bins, got {azimuth_bins}x{elevation_bins}"
            )));
        }
        let dtheta = FRAC_PI_2 / elevation_bins as f64;
        let dphi = TAU / azimuth_bins as f64;
        let n = azimuth_bins * elevation_bins;
        let (mut directions, mut solid_angles, mut weights) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..elevation_bins {
            let theta = (j as f64 + 0.5) * dtheta;
            let d_omega = theta.sin() * dtheta * dphi;
            for i in 0..azimuth_bins {
                let phi = (i as f64 + 0.5) * dphi;
                directions.push(Vec3::from_spherical(theta, phi));
                solid_angles.push(d_omega);
                weights.push(theta.cos() * d_omega);
            }
        }
        Ok(HemisphereQuadrature {
            azimuth_bins,
            elevation_bins,
            directions,
            solid_angles,
            weights,
        })
    }

    pub fn azimuth_bins(&self) -> usize {
        self.azimuth_bins
    }

    pub fn elevation_bins(&self) -> usize {
        self.elevation_bins
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn solid_angles(&self) -> &[f64] {
        &self.solid_angles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// The 16 azimuth × 8 elevation table.
pub fn build_quadrature() -> HemisphereQuadrature {
    HemisphereQuadrature::new(16, 8).expect("fixed bins are positive")
}

/// Dense 512 × 256 table used as a reference integrator.
pub fn dense_quadrature() -> HemisphereQuadrature {
    HemisphereQuadrature::new(512, 256).expect("fixed bins are positive")
}

/// Right-handed orthonormal basis `(t, b, n)` with `n = normal`.
///
/// Branchless construction of Duff et al. (2017); the tangent flips
/// discontinuously as `normal.z` crosses zero from below, which only matters
/// for interpolation, not for integration.
pub fn local_frame(normal: Vec3) -> (Vec3, Vec3, Vec3) {
    let n = normal;
    let sign = 1.0f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let t = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let bt = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    (t, bt, n)
}

fn to_world(frame: &(Vec3, Vec3, Vec3), local: Vec3) -> Vec3 {
    frame.0 * local.x + frame.1 * local.y + frame.2 * local.z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelShading {
    pub diffuse: Rgb,
    pub specular: Rgb,
    /// The view direction was below the surface; both components are zero.
    pub backfacing: bool,
}

impl PixelShading {
    fn backfacing() -> Self {
        PixelShading {
            diffuse: [0.0; 3],
            specular: [0.0; 3],
            backfacing: true,
        }
    }
}

/// `Ĩ_d = Σ f_d L cos θ dω` and `Ĩ_s = Σ f_s L cos θ dω` over the table.
pub fn render_pixel<R: Radiance + ?Sized>(
    s: &SurfaceSample,
    view: Vec3,
    env: &R,
    q: &HemisphereQuadrature,
    cfg: &BrdfConfig,
) -> PixelShading {
    if s.normal.dot(view) <= 0.0 {
        return PixelShading::backfacing();
    }
    let frame = local_frame(s.normal);
    let fd = eval_diffuse(s);
    let mut diffuse = [0.0; 3];
    let mut specular = [0.0; 3];
    for (local, w) in q.directions.iter().zip(&q.weights) {
        let light = to_world(&frame, *local);
        let radiance = env.radiance(light);
        let fs = eval_specular(s, &ShadingGeometry { view, light }, cfg);
        for c in 0..3 {
            diffuse[c] += fd[c] * radiance[c] * w;
            specular[c] += fs * radiance[c] * w;
        }
    }
    PixelShading {
        diffuse,
        specular,
        backfacing: false,
    }
}

/// Partial derivatives of one scalar parameter, per output component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComponentGrad {
    pub diffuse: Rgb,
    pub specular: Rgb,
}

impl ComponentGrad {
    fn accumulate(&mut self, fd: Rgb, fs: f64, dl: Rgb, w: f64) {
        for c in 0..3 {
            self.diffuse[c] += fd[c] * dl[c] * w;
            self.specular[c] += fs * dl[c] * w;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LobeGrad {
    pub sharpness: ComponentGrad,
    /// `intensity[k]` holds derivatives with respect to channel `k` of the
    /// lobe intensity; only channel `k` of the outputs is nonzero.
    pub intensity: [ComponentGrad; 3],
    /// Orthonormal tangents of the lobe axis, from [`local_frame`].
    pub axis_tangents: [Vec3; 2],
    /// Directional derivatives as the axis moves along each tangent.
    pub axis: [ComponentGrad; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrad {
    pub shading: PixelShading,
    /// Derivatives with respect to each albedo channel; diagonal like `intensity`.
    pub albedo: [ComponentGrad; 3],
    pub roughness: ComponentGrad,
    pub lobes: Vec<LobeGrad>,
}

/// Rendered pixel together with analytic partials of both components.
pub fn render_pixel_grad(
    s: &SurfaceSample,
    view: Vec3,
    env: &SgEnvironment,
    q: &HemisphereQuadrature,
    cfg: &BrdfConfig,
) -> PixelGrad {
    let n_lobes = env.len();
    let tangents: Vec<[Vec3; 2]> = env
        .lobes()
        .iter()
        .map(|l| {
            let (t, b, _) = local_frame(l.axis);
            [t, b]
        })
        .collect();
    let mut out = PixelGrad {
        shading: PixelShading {
            diffuse: [0.0; 3],
            specular: [0.0; 3],
            backfacing: false,
        },
        albedo: [ComponentGrad::default(); 3],
        roughness: ComponentGrad::default(),
        lobes: tangents
            .iter()
            .map(|t| LobeGrad {
                sharpness: ComponentGrad::default(),
                intensity: [ComponentGrad::default(); 3],
                axis_tangents: *t,
                axis: [ComponentGrad::default(); 2],
            })
            .collect(),
    };
    if s.normal.dot(view) <= 0.0 {
        out.shading = PixelShading::backfacing();
        return out;
    }
    let frame = local_frame(s.normal);
    let fd = eval_diffuse(s);
    let mut falloff = vec![0.0; n_lobes];
    for (local, w) in q.directions.iter().zip(&q.weights) {
        let light = to_world(&frame, *local);
        let mut radiance = [0.0; 3];
        for (l, g) in env.lobes().iter().zip(falloff.iter_mut()) {
            *g = l.falloff(light);
            for c in 0..3 {
                radiance[c] += l.intensity[c] * *g;
            }
        }
        let (fs, dfs) = eval_specular_with_derivative(s, &ShadingGeometry { view, light }, cfg);
        for c in 0..3 {
            out.shading.diffuse[c] += fd[c] * radiance[c] * w;
            out.shading.specular[c] += fs * radiance[c] * w;
            out.albedo[c].diffuse[c] += radiance[c] / PI * w;
            out.roughness.specular[c] += dfs * radiance[c] * w;
        }
        for (k, (l, g)) in env.lobes().iter().zip(&falloff).enumerate() {
            let lg = &mut out.lobes[k];
            let dl_dlambda = l.intensity.map(|f| -f * g * (1.0 - light.dot(l.axis)));
            lg.sharpness.accumulate(fd, fs, dl_dlambda, *w);
            for c in 0..3 {
                lg.intensity[c].diffuse[c] += fd[c] * g * w;
                lg.intensity[c].specular[c] += fs * g * w;
            }
            for (t, grad) in tangents[k].iter().zip(lg.axis.iter_mut()) {
                let scale = l.sharpness * light.dot(*t) * g;
                grad.accumulate(fd, fs, l.intensity.map(|f| f * scale), *w);
            }
        }
    }
    out
}

/// Per-pixel material and geometry buffers in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub albedo: HdrImage,
    pub normals: Vec<Vec3>,
    pub roughness: ScalarImage,
    pub depth: ScalarImage,
    /// Object mask; `None` renders every pixel.
    pub mask: Option<BinaryMask>,
}

impl GBuffer {
    pub fn new(
        albedo: HdrImage,
        normals: Vec<Vec3>,
        roughness: ScalarImage,
        depth: ScalarImage,
        mask: Option<BinaryMask>,
    ) -> Result<Self> {
        let (w, h) = (albedo.width(), albedo.height());
        let dims_ok = normals.len() == w * h
            && (roughness.width(), roughness.height()) == (w, h)
            && (depth.width(), depth.height()) == (w, h)
            && mask.as_ref().is_none_or(|m| (m.width(), m.height()) == (w, h));
        if !dims_ok {
            return Err(Error::DimensionMismatch(format!("G-buffer layers disagree with {w}x{h} albedo")));
        }
        let g = GBuffer {
            albedo,
            normals,
            roughness,
            depth,
            mask,
        };
        for y in 0..h {
            for x in 0..w {
                if !g.is_active(x, y) {
                    continue;
                }
                let i = y * w + x;
                if (g.normals[i].length() - 1.0).abs() > 1e-3 {
                    return Err(Error::InvalidValue(format!("normal at ({x}, {y}) is not unit length")));
                }
                if !(0.0..=1.0).contains(&g.roughness.get(x, y)) {
                    return Err(Error::InvalidValue(format!("roughness at ({x}, {y}) outside [0, 1]")));
                }
                if g.depth.get(x, y) <= 0.0 {
                    return Err(Error::InvalidValue(format!("depth at ({x}, {y}) is not positive")));
                }
                if g.albedo.pixel(x, y).iter().any(|a| *a > 1.0) {
                    return Err(Error::InvalidValue(format!("albedo at ({x}, {y}) exceeds 1")));
                }
            }
        }
        Ok(g)
    }

    /// Same material, normal and depth at every pixel.
    pub fn uniform(width: usize, height: usize, albedo: Rgb, normal: Vec3, roughness: f64, depth: f64) -> Result<Self> {
        let a = HdrImage::from_fn(width, height, |_, _| albedo)?;
        GBuffer::new(
            a,
            vec![normal; width * height],
            ScalarImage::filled(width, height, roughness as f32),
            ScalarImage::filled(width, height, depth as f32),
            None,
        )
    }

    pub fn width(&self) -> usize {
        self.albedo.width()
    }

    pub fn height(&self) -> usize {
        self.albedo.height()
    }

    pub fn is_active(&self, x: usize, y: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m.get(x, y))
    }

    pub fn normal(&self, x: usize, y: usize) -> Vec3 {
        self.normals[y * self.width() + x]
    }

    /// Surface sample at a pixel; normals are renormalized against storage rounding.
    pub fn sample(&self, x: usize, y: usize) -> Result<SurfaceSample> {
        let a = self.albedo.pixel_f64(x, y);
        let n = self
            .normal(x, y)
            .try_normalize()
            .ok_or_else(|| Error::InvalidValue(format!("zero normal at ({x}, {y})")))?;
        SurfaceSample::new(a, n, self.roughness.get(x, y) as f64)
    }

    /// Reads `albedo.pfm`, `normal.pfm`, `roughness.pfm`, `depth.pfm` and an
    /// optional `mask.png` from `dir`.
    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let albedo = read_pfm(dir.join("albedo.pfm"))?;
        let normal = read_pfm_raw(dir.join("normal.pfm"))?;
        if normal.channels != 3 {
            return Err(Error::InvalidValue("normal.pfm must have three channels".into()));
        }
        let normals = normal
            .data
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
            .collect();
        let scalar = |name: &str| -> Result<ScalarImage> {
            let p = read_pfm_raw(dir.join(name))?;
            let data = p.data.chunks_exact(p.channels).map(|c| c[0]).collect();
            ScalarImage::new(p.width, p.height, data)
        };
        let roughness = scalar("roughness.pfm")?;
        let depth = scalar("depth.pfm")?;
        let mask_path = dir.join("mask.png");
        let mask = if mask_path.exists() {
            Some(BinaryMask::read_png(&mask_path)?)
        } else {
            None
        };
        GBuffer::new(albedo, normals, roughness, depth, mask)
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (w, h) = (self.width(), self.height());
        write_pfm(&self.albedo, dir.join("albedo.pfm"))?;
        let normal = PfmData {
            width: w,
            height: h,
            channels: 3,
            data: self.normals.iter().flat_map(|n| [n.x as f32, n.y as f32, n.z as f32]).collect(),
        };
        write_pfm_raw(&normal, dir.join("normal.pfm"))?;
        for (name, img) in [("roughness.pfm", &self.roughness), ("depth.pfm", &self.depth)] {
            let p = PfmData {
                width: w,
                height: h,
                channels: 1,
                data: img.data().to_vec(),
            };
            write_pfm_raw(&p, dir.join(name))?;
        }
        if let Some(m) = &self.mask {
            m.write_png(dir.join("mask.png"))?;
        }
        Ok(())
    }
}

/// Pinhole camera at the origin looking down `-z`, `+y` up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub horizontal_fov_deg: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            horizontal_fov_deg: 63.4,
        }
    }
}

impl Camera {
    pub fn new(horizontal_fov_deg: f64) -> Result<Self> {
        if !(horizontal_fov_deg > 0.0 && horizontal_fov_deg < 180.0) {
            return Err(Error::InvalidValue(format!("field of view {horizontal_fov_deg} outside (0, 180)")));
        }
        Ok(Camera { horizontal_fov_deg })
    }

    /// Unit ray from the camera through the centre of pixel `(x, y)`.
    pub fn ray(&self, x: f64, y: f64, width: usize, height: usize) -> Vec3 {
        let t = (self.horizontal_fov_deg.to_radians() / 2.0).tan();
        let u = ((x + 0.5) / width as f64 * 2.0 - 1.0) * t;
        let v = -((y + 0.5) / height as f64 * 2.0 - 1.0) * t * height as f64 / width as f64;
        Vec3::new(u, v, -1.0).normalize()
    }

    /// Unit direction from the surface seen at `(x, y)` towards the camera.
    pub fn view_dir(&self, x: usize, y: usize, width: usize, height: usize) -> Vec3 {
        -self.ray(x as f64, y as f64, width, height)
    }

    /// Camera-space point at depth `depth` (distance along `-z`) behind pixel `(x, y)`.
    pub fn unproject(&self, x: f64, y: f64, depth: f64, width: usize, height: usize) -> Vec3 {
        let r = self.ray(x, y, width, height);
        r * (depth / -r.z)
    }
}

/// Spatially varying lighting: one environment per cell of a coarse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LightingGrid {
    rows: usize,
    cols: usize,
    cells: Vec<SgEnvironment>,
}

impl LightingGrid {
    pub fn new(rows: usize, cols: usize, cells: Vec<SgEnvironment>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} lighting grid with {} cells",
                cells.len()
            )));
        }
        Ok(LightingGrid { rows, cols, cells })
    }

    /// One environment shared by every pixel.
    pub fn shared(env: SgEnvironment) -> Self {
        LightingGrid {
            rows: 1,
            cols: 1,
            cells: vec![env],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[SgEnvironment] {
        &self.cells
    }

    pub fn cell(&self, r: usize, c: usize) -> &SgEnvironment {
        &self.cells[r * self.cols + c]
    }

    /// Pixels per cell along each axis for a `width × height` image.
    pub fn stride(&self, width: usize, height: usize) -> Result<usize> {
        if self.rows == 1 && self.cols == 1 {
            return Ok(width.max(height));
        }
        if width % self.cols != 0 || height % self.rows != 0 || width / self.cols != height / self.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} lighting grid does not tile a {width}x{height} image with a common stride",
                self.rows, self.cols
            )));
        }
        Ok(width / self.cols)
    }

    /// Environment covering pixel `(x, y)` for the given stride.
    pub fn for_pixel(&self, x: usize, y: usize, stride: usize) -> &SgEnvironment {
        if self.cells.len() == 1 {
            return &self.cells[0];
        }
        self.cell(y / stride, x / stride)
    }

    /// Header line `lightgrid <rows> <cols> <lobes>` followed by the lobes of
    /// each cell in row-major order.
    pub fn to_text(&self) -> String {
        let lobes = self.cells[0].len();
        let uniform = self.cells.iter().all(|c| c.len() == lobes);
        let mut out = String::new();
        if self.cells.len() == 1 {
            return self.cells[0].to_text();
        }
        assert!(uniform, "lighting cells must share a lobe count");
        writeln!(out, "lightgrid {} {} {}", self.rows, self.cols, lobes).unwrap();
        for env in &self.cells {
            for l in env.lobes() {
                write_lobe_line(&mut out, l);
            }
        }
        out
    }

    /// Parses a lighting grid, or a plain lobe list as a shared environment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let Some((first_no, first)) = lines.next() else {
            return Err(Error::Parse {
                line: 1,
                message: "no lighting data".into(),
            });
        };
        if !first.starts_with("lightgrid") {
            return Ok(LightingGrid::shared(SgEnvironment::from_text(text)?));
        }
        let header: Vec<usize> = first
            .split_whitespace()
            .skip(1)
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: first_no,
                message: format!("bad lightgrid header: {e}"),
            })?;
        let [rows, cols, lobes] = header[..] else {
            return Err(Error::Parse {
                line: first_no,
                message: "expected `lightgrid <rows> <cols> <lobes>`".into(),
            });
        };
        let parsed = lines.map(|(n, l)| parse_lobe_line(l, n)).collect::<Result<Vec<_>>>()?;
        if lobes == 0 || parsed.len() != rows * cols * lobes {
            return Err(Error::Parse {
                line: first_no,
                message: format!("expected {} lobe lines, found {}", rows * cols * lobes, parsed.len()),
            });
        }
        let cells = parsed
            .chunks_exact(lobes)
            .map(|c| SgEnvironment::new(c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        LightingGrid::new(rows, cols, cells)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LightingGrid::from_text(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Diffuse and specular images.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub diffuse: HdrImage,
    pub specular: HdrImage,
}

/// Renders every active pixel of `g`; inactive and back-facing pixels are zero.
pub fn render_image(
    g: &GBuffer,
    lights: &LightingGrid,
    camera: &Camera,
    q: &HemisphereQuadrature,
    cfg: &BrdfConfig,
) -> Result<Rendered> {
    let (w, h) = (g.width(), g.height());
    let stride = lights.stride(w, h)?;
    let rows: Vec<Vec<(Rgb, Rgb)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    if !g.is_active(x, y) {
                        return Ok(([0.0; 3], [0.0; 3]));
                    }
                    let s = g.sample(x, y)?;
                    let view = camera.view_dir(x, y, w, h);
                    let p = render_pixel(&s, view, lights.for_pixel(x, y, stride), q, cfg);
                    Ok((p.diffuse, p.specular))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let to_image = |pick: fn(&(Rgb, Rgb)) -> Rgb| {
        let data = rows.iter().flatten().flat_map(|p| pick(p).map(|v| v.max(0.0) as f32)).collect();
        HdrImage::new(w, h, data)
    };
    Ok(Rendered {
        diffuse: to_image(|p| p.0)?,
        specular: to_image(|p| p.1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lighting::SgLobe;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if let Some(u) = v.try_normalize() {
                if v.length() <= 1.0 {
                    return u;
                }
            }
        }
    }

    fn blanket(intensity: f64) -> SgEnvironment {
        // near-constant radiance from a very wide lobe pointing in each axis direction
        let axes = [Vec3::Z, -Vec3::Z];
        SgEnvironment::new(axes.iter().map(|a| SgLobe::new(*a, 0.01, [intensity; 3]).unwrap()).collect()).unwrap()
    }

    struct Constant(f64);

    impl Radiance for Constant {
        fn radiance(&self, _: Vec3) -> Rgb {
            [self.0; 3]
        }
    }

    #[test]
    fn quadrature_normalization() {
        let q = build_quadrature();
        assert_eq!(q.len(), 128);
        let sum_omega: f64 = q.solid_angles().iter().sum();
        let sum_cos: f64 = q.weights().iter().sum();
        assert!((sum_omega - TAU).abs() / TAU < 0.01);
        assert!((sum_cos - PI).abs() / PI < 0.01);
        let (t, p) = q.directions()[0].to_spherical();
        assert!((t - PI / 32.0).abs() < 1e-12 && (p - PI / 16.0).abs() < 1e-12);
        assert!(HemisphereQuadrature::new(0, 8).is_err());
    }

    #[test]
    fn local_frame_is_orthonormal() {
        let (t, b, n) = local_frame(Vec3::Z);
        assert!(t.z.abs() < 1e-15 && b.z.abs() < 1e-15 && t.dot(b).abs() < 1e-15);
        assert_eq!(n, Vec3::Z);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = random_unit(&mut rng);
            let (t, b, m) = local_frame(n);
            assert!((t.length() - 1.0).abs() < 1e-12 && (b.length() - 1.0).abs() < 1e-12);
            assert!(t.dot(b).abs() < 1e-12 && t.dot(n).abs() < 1e-12 && b.dot(n).abs() < 1e-12);
            let c = t.cross(b);
            assert!((c - m).length() < 1e-6);
        }
        let (t, b, _) = local_frame(-Vec3::Z);
        assert!((t.cross(b) + Vec3::Z).length() < 1e-12);
    }

    #[test]
    fn furnace() {
        let q = build_quadrature();
        for r in [0.0, 0.3, 1.0] {
            let s = SurfaceSample::new([1.0; 3], Vec3::Z, r).unwrap();
            let p = render_pixel(&s, Vec3::Z, &Constant(1.0), &q, &BrdfConfig::default());
            assert!((p.diffuse[0] - 1.0).abs() < 0.02, "{:?}", p.diffuse);
            let p = render_pixel(&s, Vec3::Z, &blanket(0.5), &q, &BrdfConfig::default());
            assert!((p.diffuse[0] - 1.0).abs() < 0.02, "{:?}", p.diffuse);
        }
    }

    #[test]
    fn zero_lighting_and_backfacing() {
        let q = build_quadrature();
        let s = SurfaceSample::new([0.5; 3], Vec3::Z, 0.4).unwrap();
        let p = render_pixel(&s, Vec3::Z, &Constant(0.0), &q, &BrdfConfig::default());
        assert_eq!((p.diffuse, p.specular), ([0.0; 3], [0.0; 3]));
        let p = render_pixel(&s, -Vec3::Z, &Constant(1.0), &q, &BrdfConfig::default());
        assert!(p.backfacing);
        assert_eq!((p.diffuse, p.specular), ([0.0; 3], [0.0; 3]));
    }

    #[test]
    fn linear_in_lobe_intensity() {
        let q = build_quadrature();
        let env = SgEnvironment::new(vec![SgLobe::new(Vec3::new(0.3, 0.2, 0.9).normalize(), 8.0, [1.0, 0.5, 2.0]).unwrap()])
            .unwrap();
        let s = SurfaceSample::new([0.6, 0.4, 0.2], Vec3::new(0.1, 0.0, 1.0).normalize(), 0.35).unwrap();
        let v = Vec3::new(-0.2, 0.1, 1.0).normalize();
        let a = render_pixel(&s, v, &env, &q, &BrdfConfig::default());
        let b = render_pixel(&s, v, &env.scaled(2.0), &q, &BrdfConfig::default());
        for c in 0..3 {
            assert_eq!(b.diffuse[c], 2.0 * a.diffuse[c]);
            assert_eq!(b.specular[c], 2.0 * a.specular[c]);
            assert!(a.diffuse[c] >= 0.0 && a.specular[c] >= 0.0);
        }
    }

    #[test]
    fn grad_shading_matches_render_pixel() {
        let q = build_quadrature();
        let env = blanket(0.7);
        let s = SurfaceSample::new([0.6, 0.4, 0.2], Vec3::Z, 0.35).unwrap();
        let v = Vec3::new(0.3, 0.0, 1.0).normalize();
        let p = render_pixel(&s, v, &env, &q, &BrdfConfig::default());
        let g = render_pixel_grad(&s, v, &env, &q, &BrdfConfig::default());
        assert_eq!(p, g.shading);
        for c in 0..3 {
            assert!((g.albedo[c].diffuse[c] - p.diffuse[c] / s.albedo[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let q = build_quadrature();
        let cfg = BrdfConfig::default();
        let h = 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = random_unit(&mut rng);
            let n = if n.z < 0.0 { -n } else { n };
            let mut v = random_unit(&mut rng);
            if v.dot(n) < 0.2 {
                v = (n * 1.5 + v).normalize();
            }
            let albedo = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
            let s = SurfaceSample::new(albedo, n, rng.random_range(0.2..0.9)).unwrap();
            let lobes: Vec<SgLobe> = (0..3)
                .map(|_| {
                    let f = [rng.random_range(0.2..2.0), rng.random_range(0.2..2.0), rng.random_range(0.2..2.0)];
                    SgLobe::new(random_unit(&mut rng), rng.random_range(1.0..10.0), f).unwrap()
                })
                .collect();
            let env = SgEnvironment::new(lobes.clone()).unwrap();
            let grad = render_pixel_grad(&s, v, &env, &q, &cfg);
            let check = |an: &ComponentGrad, plus: PixelShading, minus: PixelShading| {
                for c in 0..3 {
                    for (a, p, m) in [
                        (an.diffuse[c], plus.diffuse[c], minus.diffuse[c]),
                        (an.specular[c], plus.specular[c], minus.specular[c]),
                    ] {
                        let fd = (p - m) / (2.0 * h);
                        let scale = a.abs().max(fd.abs()).max(1e-8);
                        assert!((a - fd).abs() / scale < 1e-3, "analytic {a} vs fd {fd}");
                    }
                }
            };
            let mut sp = s;
            let mut sm = s;
            sp.roughness += h;
            sm.roughness -= h;
            check(&grad.roughness, render_pixel(&sp, v, &env, &q, &cfg), render_pixel(&sm, v, &env, &q, &cfg));
            for k in 0..lobes.len() {
                let with = |edit: &dyn Fn(&mut SgLobe)| {
                    let mut ls = lobes.clone();
                    edit(&mut ls[k]);
                    render_pixel(&s, v, &SgEnvironment::new(ls).unwrap(), &q, &cfg)
                };
                check(
                    &grad.lobes[k].sharpness,
                    with(&|l| l.sharpness += h),
                    with(&|l| l.sharpness -= h),
                );
                for c in 0..3 {
                    check(
                        &grad.lobes[k].intensity[c],
                        with(&|l| l.intensity[c] += h),
                        with(&|l| l.intensity[c] -= h),
                    );
                }
                for t in 0..2 {
                    let tan = grad.lobes[k].axis_tangents[t];
                    check(
                        &grad.lobes[k].axis[t],
                        with(&|l| l.axis = (l.axis + tan * h).normalize()),
                        with(&|l| l.axis = (l.axis - tan * h).normalize()),
                    );
                }
            }
        }
    }

    #[test]
    fn lighting_grid_text_round_trip() {
        let env = blanket(1.0);
        let grid = LightingGrid::new(2, 3, vec![env.clone(); 6]).unwrap();
        let back = LightingGrid::from_text(&grid.to_text()).unwrap();
        assert_eq!(back.rows(), 2);
        assert_eq!(back.cols(), 3);
        for (a, b) in grid.cells().iter().zip(back.cells()) {
            for (la, lb) in a.lobes().iter().zip(b.lobes()) {
                assert!((la.axis - lb.axis).length() < 1e-12);
                assert!((la.sharpness - lb.sharpness).abs() < 1e-12);
            }
        }
        let shared = LightingGrid::from_text(&env.to_text()).unwrap();
        assert_eq!((shared.rows(), shared.cols()), (1, 1));
        assert!(LightingGrid::from_text("lightgrid 2 2 1\n0 0 1 1 1 1 1\n").is_err());
    }

    #[test]
    fn stride_mapping() {
        let grid = LightingGrid::new(2, 3, vec![blanket(1.0); 6]).unwrap();
        assert_eq!(grid.stride(12, 8).unwrap(), 4);
        assert!(grid.stride(12, 9).is_err());
        assert!(grid.stride(12, 4).is_err());
        let shared = LightingGrid::shared(blanket(1.0));
        assert!(shared.stride(7, 5).is_ok());
    }

    #[test]
    fn uniform_gbuffer_renders_constant_under_orthographic_like_view() {
        // the view varies per pixel, so a constant image needs lighting that is
        // view independent: pure diffuse
        let g = GBuffer::uniform(6, 4, [0.5; 3], Vec3::Z, 0.5, 2.0).unwrap();
        let out = render_image(&g, &LightingGrid::shared(blanket(1.0)), &Camera::default(), &build_quadrature(), &BrdfConfig::default())
            .unwrap();
        let first = out.diffuse.pixel(0, 0);
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(out.diffuse.pixel(x, y), first);
            }
        }
    }

    #[test]
    fn render_image_equals_pixel_loop_and_respects_mask() {
        let (w, h) = (8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut g = GBuffer::uniform(w, h, [0.5; 3], Vec3::Z, 0.3, 2.0).unwrap();
        for n in g.normals.iter_mut() {
            *n = (Vec3::Z * 2.0 + random_unit(&mut rng)).normalize();
        }
        g.mask = Some(BinaryMask::from_fn(w, h, |x, _| x != 3));
        let cells: Vec<SgEnvironment> = (0..2)
            .map(|i| SgEnvironment::new(vec![SgLobe::new(Vec3::new(0.2 * i as f64, 0.3, 0.9).normalize(), 5.0, [1.0, 2.0, 0.5]).unwrap()]).unwrap())
            .collect();
        let lights = LightingGrid::new(1, 2, cells).unwrap();
        let cam = Camera::default();
        let q = build_quadrature();
        let cfg = BrdfConfig::default();
        let out = render_image(&g, &lights, &cam, &q, &cfg).unwrap();
        for y in 0..h {
            for x in 0..w {
                if x == 3 {
                    assert_eq!(out.diffuse.pixel(x, y), [0.0; 3]);
                    assert_eq!(out.specular.pixel(x, y), [0.0; 3]);
                    continue;
                }
                let p = render_pixel(&g.sample(x, y).unwrap(), cam.view_dir(x, y, w, h), lights.cell(0, x / 4), &q, &cfg);
                assert_eq!(out.diffuse.pixel(x, y), p.diffuse.map(|v| v as f32));
                assert_eq!(out.specular.pixel(x, y), p.specular.map(|v| v as f32));
            }
        }
    }

    #[test]
    fn gbuffer_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = GBuffer::uniform(3, 2, [0.25, 0.5, 0.75], Vec3::new(0.0, 0.6, 0.8), 0.4, 3.0).unwrap();
        g.mask = Some(BinaryMask::from_fn(3, 2, |x, y| x + y != 1));
        g.write_dir(dir.path()).unwrap();
        let back = GBuffer::read_dir(dir.path()).unwrap();
        assert_eq!((&back.albedo, &back.roughness, &back.depth, &back.mask), (&g.albedo, &g.roughness, &g.depth, &g.mask));
        for (a, b) in back.normals.iter().zip(&g.normals) {
            assert!((*a - *b).length() < 1e-7);
        }
    }

    #[test]
    fn gbuffer_validation() {
        assert!(GBuffer::uniform(2, 2, [0.5; 3], Vec3::new(0.0, 0.0, 2.0), 0.5, 1.0).is_err());
        assert!(GBuffer::uniform(2, 2, [0.5; 3], Vec3::Z, 1.5, 1.0).is_err());
        assert!(GBuffer::uniform(2, 2, [0.5; 3], Vec3::Z, 0.5, 0.0).is_err());
    }

    #[test]
    fn camera_centre_ray_looks_down_negative_z() {
        let cam = Camera::default();
        let r = cam.ray(1.5, 1.5, 4, 4);
        assert!((r - Vec3::new(0.0, 0.0, -1.0)).length() < 1e-12);
        let p = cam.unproject(0.0, 0.0, 2.0, 4, 4);
        assert!((p.z + 2.0).abs() < 1e-12 && p.x < 0.0 && p.y > 0.0);
        assert!(Camera::new(180.0).is_err());
    }
}
