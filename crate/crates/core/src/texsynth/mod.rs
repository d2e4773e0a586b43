//! Tileable SVBRDF texture synthesis.
//!
//! A patch is cropped where the gradients across its border are weakest,
//! then made periodic by two graph cuts: the strip right of the patch is
//! stitched onto its left edge, and the strip below onto its top edge.

pub mod maxflow;

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{read_png_ldr, read_png_luma, write_png_ldr, write_png_luma, LdrImage, ScalarImage};
use crate::math::{Rgb, Vec3};
use maxflow::FlowGraph;

const FEATURES: usize = 7;
type Features = [f64; FEATURES];
/// Feature index ranges of albedo, normal and roughness.
const GROUPS: [std::ops::Range<usize>; 3] = [0..3, 3..6, 6..7];

/// Aligned albedo, normal and roughness maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SvbrdfTexture {
    width: usize,
    height: usize,
    albedo: Vec<Rgb>,
    normal: Vec<Vec3>,
    roughness: Vec<f64>,
}

impl SvbrdfTexture {
    pub fn new(width: usize, height: usize, albedo: Vec<Rgb>, normal: Vec<Vec3>, roughness: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if n == 0 {
            return Err(Error::InvalidValue("texture has zero size".into()));
        }
        if albedo.len() != n || normal.len() != n || roughness.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} texture needs {n} samples per map, got {}/{}/{}",
                albedo.len(),
                normal.len(),
                roughness.len()
            )));
        }
        if let Some(i) = albedo.iter().position(|a| a.iter().any(|v| !v.is_finite() || *v < 0.0)) {
            return Err(Error::InvalidValue(format!("albedo sample {i} is negative or non-finite")));
        }
        if let Some(i) = normal.iter().position(|v| (v.length() - 1.0).abs() > 1e-3) {
            return Err(Error::InvalidValue(format!("normal sample {i} is not unit length")));
        }
        if let Some(i) = roughness.iter().position(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidValue(format!("roughness sample {i} outside [0, 1]")));
        }
        Ok(SvbrdfTexture {
            width,
            height,
            albedo,
            normal,
            roughness,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (Rgb, Vec3, f64)) -> Result<Self> {
        let (mut a, mut n, mut r) = (Vec::new(), Vec::new(), Vec::new());
        for y in 0..height {
            for x in 0..width {
                let (av, nv, rv) = f(x, y);
                a.push(av);
                n.push(nv);
                r.push(rv);
            }
        }
        Self::new(width, height, a, n, r)
    }

    /// Texture built from a greyscale height field in `[0, 1]`: the albedo is
    /// the height, normals follow its central differences scaled by
    /// `bump`, and roughness is `0.3 + 0.5·h`.
    pub fn from_height(height_map: &ScalarImage, bump: f64) -> Result<Self> {
        let (w, h) = (height_map.width(), height_map.height());
        let at = |x: isize, y: isize| {
            let x = x.clamp(0, w as isize - 1) as usize;
            let y = y.clamp(0, h as isize - 1) as usize;
            height_map.get(x, y) as f64
        };
        Self::from_fn(w, h, |x, y| {
            let (xi, yi) = (x as isize, y as isize);
            let v = at(xi, yi);
            let dx = 0.5 * (at(xi + 1, yi) - at(xi - 1, yi));
            let dy = 0.5 * (at(xi, yi + 1) - at(xi, yi - 1));
            let n = Vec3::new(-bump * dx, -bump * dy, 1.0).normalize();
            ([v; 3], n, 0.3 + 0.5 * v)
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn albedo(&self, x: usize, y: usize) -> Rgb {
        self.albedo[self.index(x, y)]
    }

    pub fn normal(&self, x: usize, y: usize) -> Vec3 {
        self.normal[self.index(x, y)]
    }

    pub fn roughness(&self, x: usize, y: usize) -> f64 {
        self.roughness[self.index(x, y)]
    }

    fn features(&self, x: usize, y: usize) -> Features {
        let i = self.index(x, y);
        let (a, n) = (self.albedo[i], self.normal[i]);
        [a[0], a[1], a[2], n.x, n.y, n.z, self.roughness[i]]
    }

    fn copy_pixel(&mut self, x: usize, y: usize, src: &SvbrdfTexture, sx: usize, sy: usize) {
        let (i, j) = (self.index(x, y), src.index(sx, sy));
        self.albedo[i] = src.albedo[j];
        self.normal[i] = src.normal[j];
        self.roughness[i] = src.roughness[j];
    }

    pub fn crop(&self, window: Window) -> Result<SvbrdfTexture> {
        window.check_inside(self)?;
        let mut out = SvbrdfTexture {
            width: window.width,
            height: window.height,
            albedo: Vec::with_capacity(window.area()),
            normal: Vec::with_capacity(window.area()),
            roughness: Vec::with_capacity(window.area()),
        };
        for y in window.y..window.y + window.height {
            let row = self.index(window.x, y)..self.index(window.x + window.width, y);
            out.albedo.extend_from_slice(&self.albedo[row.clone()]);
            out.normal.extend_from_slice(&self.normal[row.clone()]);
            out.roughness.extend_from_slice(&self.roughness[row]);
        }
        Ok(out)
    }

    /// Periodic repetition into a `nx × ny` grid of copies.
    pub fn tiled(&self, nx: usize, ny: usize) -> SvbrdfTexture {
        let (w, h) = (self.width * nx, self.height * ny);
        let mut out = SvbrdfTexture {
            width: w,
            height: h,
            albedo: vec![[0.0; 3]; w * h],
            normal: vec![Vec3::Z; w * h],
            roughness: vec![0.0; w * h],
        };
        for y in 0..h {
            for x in 0..w {
                out.copy_pixel(x, y, self, x % self.width, y % self.height);
            }
        }
        out
    }

    /// Reads the three maps from 8-bit images. Albedo is kept in its stored
    /// encoding, normals are decoded from `[0, 1]` to unit vectors and
    /// roughness is the luminance of its image.
    pub fn read_png(albedo: impl AsRef<Path>, normal: impl AsRef<Path>, roughness: impl AsRef<Path>) -> Result<Self> {
        let a = read_png_ldr(albedo)?;
        let n = read_png_ldr(normal)?;
        let r = read_png_luma(roughness)?;
        let (w, h) = (a.width(), a.height());
        if (n.width(), n.height()) != (w, h) || (r.width(), r.height()) != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "albedo {w}x{h}, normal {}x{}, roughness {}x{}",
                n.width(),
                n.height(),
                r.width(),
                r.height()
            )));
        }
        let mut normals = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let p = n.pixel(x, y).map(|v| 2.0 * v as f64 - 1.0);
                let v = Vec3::from_array(p).try_normalize().ok_or_else(|| {
                    Error::InvalidValue(format!("normal map pixel ({x}, {y}) decodes to a zero vector"))
                })?;
                normals.push(v);
            }
        }
        let albedo = a.data().chunks_exact(3).map(|p| [p[0] as f64, p[1] as f64, p[2] as f64]).collect();
        let rough = r.data().iter().map(|v| *v as f64).collect();
        Self::new(w, h, albedo, normals, rough)
    }

    pub fn albedo_image(&self) -> Result<LdrImage> {
        let data = self.albedo.iter().flat_map(|a| a.map(|v| v.clamp(0.0, 1.0) as f32)).collect();
        LdrImage::new(self.width, self.height, data)
    }

    /// Writes `albedo.png`, `normal.png` and `roughness.png` into `dir`.
    pub fn write_png(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_png_ldr(&self.albedo_image()?, dir.join("albedo.png"))?;
        let normal = self
            .normal
            .iter()
            .flat_map(|n| n.to_array().map(|v| (0.5 * v + 0.5).clamp(0.0, 1.0) as f32))
            .collect();
        write_png_ldr(&LdrImage::new(self.width, self.height, normal)?, dir.join("normal.png"))?;
        let rough = self.roughness.iter().map(|v| *v as f32).collect();
        write_png_luma(&ScalarImage::new(self.width, self.height, rough)?, dir.join("roughness.png"))
    }
}

/// Axis-aligned pixel rectangle with top-left corner `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Window {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Window {
    pub fn square(x: usize, y: usize, size: usize) -> Self {
        Window {
            x,
            y,
            width: size,
            height: size,
        }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    fn check_inside(&self, tex: &SvbrdfTexture) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.x + self.width > tex.width || self.y + self.height > tex.height {
            return Err(Error::OutOfRange(format!(
                "window {}x{} at ({}, {}) outside {}x{} texture",
                self.width, self.height, self.x, self.y, tex.width, tex.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexSynthConfig {
    pub lambda_a: f64,
    pub lambda_n: f64,
    pub lambda_r: f64,
    /// Width of the stitched strips; `None` picks `patch/8`, at least 4.
    pub overlap_width: Option<usize>,
    pub epsilon_floor: f64,
}

impl Default for TexSynthConfig {
    fn default() -> Self {
        TexSynthConfig {
            lambda_a: 1.0,
            lambda_n: 1.0,
            lambda_r: 1.0,
            overlap_width: None,
            epsilon_floor: 0.1,
        }
    }
}

impl TexSynthConfig {
    pub fn validate(&self) -> Result<()> {
        let w = self.weights();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidValue(format!("channel weights {w:?} must be non-negative and not all zero")));
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::InvalidValue("epsilon floor must be positive".into()));
        }
        if matches!(self.overlap_width, Some(w) if w < 2) {
            return Err(Error::InvalidValue("overlap width must be at least 2".into()));
        }
        Ok(())
    }

    fn weights(&self) -> [f64; 3] {
        [self.lambda_a, self.lambda_n, self.lambda_r]
    }

    pub fn overlap_for(&self, patch_size: usize) -> usize {
        self.overlap_width.unwrap_or((patch_size / 8).max(4))
    }
}

fn group_l1(v: &Features, g: usize) -> f64 {
    GROUPS[g].clone().map(|i| v[i].abs()).sum()
}

fn weighted_l1(a: &Features, b: &Features, cfg: &TexSynthConfig) -> f64 {
    let d: Features = std::array::from_fn(|i| b[i] - a[i]);
    cfg.weights().iter().enumerate().map(|(g, w)| w * group_l1(&d, g)).sum()
}

/// Weighted forward-difference magnitudes; zero on the last column/row.
struct GradientMaps {
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl GradientMaps {
    fn new(tex: &SvbrdfTexture, cfg: &TexSynthConfig) -> Self {
        let (w, h) = (tex.width, tex.height);
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let f = tex.features(x, y);
                if x + 1 < w {
                    gx[y * w + x] = weighted_l1(&f, &tex.features(x + 1, y), cfg);
                }
                if y + 1 < h {
                    gy[y * w + x] = weighted_l1(&f, &tex.features(x, y + 1), cfg);
                }
            }
        }
        GradientMaps { gx, gy }
    }
}

/// Sum of `|∇x|` over the left and right columns of `window` plus `|∇y|` over
/// its top and bottom rows, with forward differences and channel weights.
pub fn boundary_gradient_energy(tex: &SvbrdfTexture, window: Window, cfg: &TexSynthConfig) -> Result<f64> {
    window.check_inside(tex)?;
    let g = GradientMaps::new(tex, cfg);
    Ok(window_energy_direct(&g, tex.width, window))
}

fn window_energy_direct(g: &GradientMaps, w: usize, win: Window) -> f64 {
    let (x1, y1) = (win.x + win.width - 1, win.y + win.height - 1);
    let mut e = 0.0;
    for y in win.y..=y1 {
        e += g.gx[y * w + win.x] + g.gx[y * w + x1];
    }
    for x in win.x..=x1 {
        e += g.gy[win.y * w + x] + g.gy[y1 * w + x];
    }
    e
}

/// Window of side `patch_size` with the least boundary gradient energy.
/// Ties go to the smallest `(row, col)`.
pub fn find_optimal_patch(tex: &SvbrdfTexture, patch_size: usize, cfg: &TexSynthConfig) -> Result<Window> {
    search_patch(tex, patch_size, 0, cfg)
}

/// Like [`find_optimal_patch`] but leaves `margin` pixels to the right of and
/// below the window.
fn search_patch(tex: &SvbrdfTexture, patch_size: usize, margin: usize, cfg: &TexSynthConfig) -> Result<Window> {
    cfg.validate()?;
    let need = patch_size + margin;
    if patch_size == 0 || need > tex.width || need > tex.height {
        return Err(Error::OutOfRange(format!(
            "patch {patch_size} plus margin {margin} does not fit a {}x{} texture",
            tex.width, tex.height
        )));
    }
    let (w, h) = (tex.width, tex.height);
    let g = GradientMaps::new(tex, cfg);
    // col[y][x]: gx summed over rows < y in column x; row[y][x]: gy summed over columns < x
    let mut col = vec![0.0; (h + 1) * w];
    for y in 0..h {
        for x in 0..w {
            col[(y + 1) * w + x] = col[y * w + x] + g.gx[y * w + x];
        }
    }
    let mut row = vec![0.0; h * (w + 1)];
    for y in 0..h {
        for x in 0..w {
            row[y * (w + 1) + x + 1] = row[y * (w + 1) + x] + g.gy[y * w + x];
        }
    }
    let column_sum = |x: usize, y0: usize| col[(y0 + patch_size) * w + x] - col[y0 * w + x];
    let row_sum = |y: usize, x0: usize| row[y * (w + 1) + x0 + patch_size] - row[y * (w + 1) + x0];
    let last = patch_size - 1;
    let mut best = (f64::INFINITY, Window::square(0, 0, patch_size));
    for y in 0..=h - need {
        for x in 0..=w - need {
            let e = column_sum(x, y) + column_sum(x + last, y) + row_sum(y, x) + row_sum(y + last, x);
            if e < best.0 {
                best = (e, Window::square(x, y, patch_size));
            }
        }
    }
    Ok(best.1)
}

/// Gradient energy across the internal seams of a `repeats × repeats`
/// periodic tiling of `tile`.
pub fn tiling_seam_energy(tile: &SvbrdfTexture, repeats: usize, cfg: &TexSynthConfig) -> f64 {
    let big = tile.tiled(repeats, repeats);
    let g = GradientMaps::new(&big, cfg);
    let w = big.width;
    let mut e = 0.0;
    for k in 1..repeats {
        let sx = k * tile.width - 1;
        for y in 0..big.height {
            e += g.gx[y * w + sx];
        }
        let sy = k * tile.height - 1;
        for x in 0..w {
            e += g.gy[sy * w + x];
        }
    }
    e
}

/// Source patch of an overlap pixel. `First` is the source side of the cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeamLabel {
    First = 1,
    Second = 2,
}

/// Cost of labelling `u` with `lu` and its successor `v` (one step right or
/// down) with `lv`. Each channel group contributes the smaller of the
/// seam-gradient mismatches relative to either patch's own gradient.
fn pair_cost(p: [&SvbrdfTexture; 2], u: (usize, usize), v: (usize, usize), lu: SeamLabel, lv: SeamLabel, cfg: &TexSynthConfig) -> f64 {
    if lu == lv {
        return 0.0;
    }
    let pick = |l: SeamLabel| p[l as usize - 1];
    let (a, b) = (pick(lu), pick(lv));
    let (au, av) = (a.features(u.0, u.1), a.features(v.0, v.1));
    let (bu, bv) = (b.features(u.0, u.1), b.features(v.0, v.1));
    let cross: Features = std::array::from_fn(|i| bv[i] - au[i]);
    let self_a: Features = std::array::from_fn(|i| av[i] - au[i]);
    let self_b: Features = std::array::from_fn(|i| bv[i] - bu[i]);
    let diff_a: Features = std::array::from_fn(|i| cross[i] - self_a[i]);
    let diff_b: Features = std::array::from_fn(|i| cross[i] - self_b[i]);
    let eps = cfg.epsilon_floor;
    cfg.weights()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(g, w)| {
            let ra = group_l1(&diff_a, g) / group_l1(&self_a, g).max(eps);
            let rb = group_l1(&diff_b, g) / group_l1(&self_b, g).max(eps);
            w * ra.min(rb)
        })
        .sum()
}

/// Seam cost when pixel `p` takes `patch1` and the 4-adjacent pixel `q`
/// takes `patch2`. Both patches cover the same overlap region.
pub fn seam_energy(
    patch1: &SvbrdfTexture,
    patch2: &SvbrdfTexture,
    p: (usize, usize),
    q: (usize, usize),
    cfg: &TexSynthConfig,
) -> Result<f64> {
    if (patch1.width, patch1.height) != (patch2.width, patch2.height) {
        return Err(Error::DimensionMismatch("seam patches differ in size".into()));
    }
    for (x, y) in [p, q] {
        if x >= patch1.width || y >= patch1.height {
            return Err(Error::OutOfRange(format!("pixel ({x}, {y}) outside the overlap")));
        }
    }
    if p.0.abs_diff(q.0) + p.1.abs_diff(q.1) != 1 {
        return Err(Error::InvalidValue(format!("pixels {p:?} and {q:?} are not 4-adjacent")));
    }
    let patches = [patch1, patch2];
    Ok(if p < q {
        pair_cost(patches, p, q, SeamLabel::First, SeamLabel::Second, cfg)
    } else {
        pair_cost(patches, q, p, SeamLabel::Second, SeamLabel::First, cfg)
    })
}

/// Hard constraint on the overlap labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeamConstraint {
    First(usize, usize),
    Second(usize, usize),
    /// Both pixels share a label.
    Tie((usize, usize), (usize, usize)),
}

/// Pairwise label costs over a `width × height` overlap. `right[i]` holds
/// the costs of (First, Second) and (Second, First) for pixel `i` and its
/// right neighbour; `down` likewise for the pixel below.
#[derive(Debug, Clone, PartialEq)]
pub struct SeamProblem {
    width: usize,
    height: usize,
    right: Vec<[f64; 2]>,
    down: Vec<[f64; 2]>,
    constraints: Vec<SeamConstraint>,
}

impl SeamProblem {
    /// `right` is indexed `y·(width−1) + x`, `down` is indexed `y·width + x`.
    pub fn new(width: usize, height: usize, right: Vec<[f64; 2]>, down: Vec<[f64; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidValue("empty overlap".into()));
        }
        if right.len() != (width - 1) * height || down.len() != width * (height - 1) {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} overlap needs {} horizontal and {} vertical pairs",
                (width - 1) * height,
                width * (height - 1)
            )));
        }
        if right.iter().chain(&down).flatten().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidValue("pair costs must be finite and non-negative".into()));
        }
        Ok(SeamProblem {
            width,
            height,
            right,
            down,
            constraints: Vec::new(),
        })
    }

    /// Costs between two co-located patches.
    pub fn from_patches(first: &SvbrdfTexture, second: &SvbrdfTexture, cfg: &TexSynthConfig) -> Result<Self> {
        if (first.width, first.height) != (second.width, second.height) {
            return Err(Error::DimensionMismatch("seam patches differ in size".into()));
        }
        let (w, h) = (first.width, first.height);
        let p = [first, second];
        let costs = |u, v| {
            [
                pair_cost(p, u, v, SeamLabel::First, SeamLabel::Second, cfg),
                pair_cost(p, u, v, SeamLabel::Second, SeamLabel::First, cfg),
            ]
        };
        let mut right = Vec::with_capacity((w - 1) * h);
        for y in 0..h {
            for x in 0..w - 1 {
                right.push(costs((x, y), (x + 1, y)));
            }
        }
        let mut down = Vec::with_capacity(w * (h - 1));
        for y in 0..h - 1 {
            for x in 0..w {
                down.push(costs((x, y), (x, y + 1)));
            }
        }
        Self::new(w, h, right, down)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn constrain(&mut self, c: SeamConstraint) -> Result<()> {
        let pixels = match c {
            SeamConstraint::First(x, y) | SeamConstraint::Second(x, y) => vec![(x, y)],
            SeamConstraint::Tie(a, b) => vec![a, b],
        };
        if let Some((x, y)) = pixels.into_iter().find(|&(x, y)| x >= self.width || y >= self.height) {
            return Err(Error::OutOfRange(format!("constraint pixel ({x}, {y}) outside the overlap")));
        }
        self.constraints.push(c);
        Ok(())
    }

    /// Total cost of a labelling; infinite if it breaks a constraint.
    pub fn labeling_cost(&self, labels: &[SeamLabel]) -> f64 {
        let w = self.width;
        let at = |x: usize, y: usize| labels[y * w + x];
        for c in &self.constraints {
            let ok = match *c {
                SeamConstraint::First(x, y) => at(x, y) == SeamLabel::First,
                SeamConstraint::Second(x, y) => at(x, y) == SeamLabel::Second,
                SeamConstraint::Tie(a, b) => at(a.0, a.1) == at(b.0, b.1),
            };
            if !ok {
                return f64::INFINITY;
            }
        }
        let pair = |c: [f64; 2], a: SeamLabel, b: SeamLabel| match (a, b) {
            (SeamLabel::First, SeamLabel::Second) => c[0],
            (SeamLabel::Second, SeamLabel::First) => c[1],
            _ => 0.0,
        };
        let mut cost = 0.0;
        for y in 0..self.height {
            for x in 0..w {
                if x + 1 < w {
                    cost += pair(self.right[y * (w - 1) + x], at(x, y), at(x + 1, y));
                }
                if y + 1 < self.height {
                    cost += pair(self.down[y * w + x], at(x, y), at(x, y + 1));
                }
            }
        }
        cost
    }
}

/// Minimum-cost labelling of an overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct SeamLabels {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<SeamLabel>,
    pub cost: f64,
}

impl SeamLabels {
    pub fn get(&self, x: usize, y: usize) -> SeamLabel {
        self.labels[y * self.width + x]
    }
}

/// Globally optimal labelling by minimum s-t cut. Pixels on the source side
/// take the first patch.
pub fn min_cut_seam(problem: &SeamProblem) -> Result<SeamLabels> {
    let (w, h) = (problem.width, problem.height);
    let n = w * h;
    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                let [ab, ba] = problem.right[y * (w - 1) + x];
                if ab > 0.0 || ba > 0.0 {
                    g.add_edge(i, i + 1, ab, ba);
                }
            }
            if y + 1 < h {
                let [ab, ba] = problem.down[i];
                if ab > 0.0 || ba > 0.0 {
                    g.add_edge(i, i + w, ab, ba);
                }
            }
        }
    }
    for c in &problem.constraints {
        match *c {
            SeamConstraint::First(x, y) => g.add_edge(s, y * w + x, f64::INFINITY, 0.0),
            SeamConstraint::Second(x, y) => g.add_edge(y * w + x, t, f64::INFINITY, 0.0),
            SeamConstraint::Tie(a, b) => g.add_edge(a.1 * w + a.0, b.1 * w + b.0, f64::INFINITY, f64::INFINITY),
        }
    }
    g.max_flow(s, t)?;
    let side = g.source_side(s);
    let labels: Vec<SeamLabel> = side[..n]
        .iter()
        .map(|&src| if src { SeamLabel::First } else { SeamLabel::Second })
        .collect();
    let cost = problem.labeling_cost(&labels);
    if !cost.is_finite() {
        return Err(Error::InfeasibleConstraints("cut violates a hard constraint".into()));
    }
    Ok(SeamLabels {
        width: w,
        height: h,
        labels,
        cost,
    })
}

/// Tileable patch with the cuts that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tileable {
    pub texture: SvbrdfTexture,
    /// Source window of the patch.
    pub window: Window,
    pub overlap: usize,
    pub horizontal_seam: SeamLabels,
    pub vertical_seam: SeamLabels,
}

/// Crops the best `patch_size` square and makes it periodic in both axes.
///
/// The strip of `overlap` columns right of the patch is stitched over the
/// patch's first columns, so the last column continues naturally into the
/// first. The same is then done with the rows below, with the left and
/// right pixels of each overlap row tied so the horizontal periodicity from
/// the first pass survives.
pub fn make_tileable(tex: &SvbrdfTexture, patch_size: usize, cfg: &TexSynthConfig) -> Result<Tileable> {
    cfg.validate()?;
    let ov = cfg.overlap_for(patch_size);
    if ov > patch_size {
        return Err(Error::InvalidValue(format!("overlap {ov} exceeds patch size {patch_size}")));
    }
    let window = search_patch(tex, patch_size, ov, cfg)?;
    let p = patch_size;
    let ext = tex.crop(Window::square(window.x, window.y, p + ov))?;

    // horizontal pass over all p + ov rows so the vertical pass has its strip
    let first = ext.crop(Window { x: p, y: 0, width: ov, height: p + ov })?;
    let second = ext.crop(Window { x: 0, y: 0, width: ov, height: p + ov })?;
    let mut problem = SeamProblem::from_patches(&first, &second, cfg)?;
    for y in 0..p + ov {
        problem.constrain(SeamConstraint::First(0, y))?;
        problem.constrain(SeamConstraint::Second(ov - 1, y))?;
    }
    let horizontal_seam = min_cut_seam(&problem)?;
    let mut strip = ext.crop(Window { x: 0, y: 0, width: p, height: p + ov })?;
    for y in 0..p + ov {
        for x in 0..ov {
            if horizontal_seam.get(x, y) == SeamLabel::First {
                strip.copy_pixel(x, y, &first, x, y);
            }
        }
    }

    let first = strip.crop(Window { x: 0, y: p, width: p, height: ov })?;
    let second = strip.crop(Window { x: 0, y: 0, width: p, height: ov })?;
    let mut problem = SeamProblem::from_patches(&first, &second, cfg)?;
    for x in 0..p {
        problem.constrain(SeamConstraint::First(x, 0))?;
        problem.constrain(SeamConstraint::Second(x, ov - 1))?;
    }
    for y in 0..ov {
        problem.constrain(SeamConstraint::Tie((0, y), (p - 1, y)))?;
    }
    let vertical_seam = min_cut_seam(&problem)?;
    let mut texture = strip.crop(Window::square(0, 0, p))?;
    for y in 0..ov {
        for x in 0..p {
            if vertical_seam.get(x, y) == SeamLabel::First {
                texture.copy_pixel(x, y, &first, x, y);
            }
        }
    }
    Ok(Tileable {
        texture,
        window,
        overlap: ov,
        horizontal_seam,
        vertical_seam,
    })
}

/// Patch sizes of one half, one third and one quarter of the shorter side.
pub fn standard_patch_sizes(tex: &SvbrdfTexture) -> [usize; 3] {
    let d = tex.width.min(tex.height);
    [d / 2, d / 3, d / 4]
}

/// [`make_tileable`] at each of [`standard_patch_sizes`].
pub fn make_tileable_set(tex: &SvbrdfTexture, cfg: &TexSynthConfig) -> Result<Vec<Tileable>> {
    standard_patch_sizes(tex).into_iter().map(|p| make_tileable(tex, p, cfg)).collect()
}
