//! Scale-invariant losses and albedo/lighting scale resolution.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, HdrImage, ScalarImage};
use crate::lighting::SgEnvironment;

/// Determinant threshold separating the specular branch from the albedo-max fallback.
pub const DETERMINANT_THRESHOLD: f64 = 1e-7;

/// Search interval for a multiplicative scale, in natural-log units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaleBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for LogScaleBounds {
    /// `[1e-3, 1e3]`.
    fn default() -> Self {
        let r = 3.0 * std::f64::consts::LN_10;
        LogScaleBounds { lo: -r, hi: r }
    }
}

impl LogScaleBounds {
    /// Degenerate interval pinning the scale to `scale`.
    pub fn fixed(scale: f64) -> Self {
        let t = scale.ln();
        LogScaleBounds { lo: t, hi: t }
    }
}

/// Golden-section minimization of `f(exp t)` over `t ∈ [lo, hi]`; returns the scale.
fn golden_log_scale(f: impl Fn(f64) -> f64, bounds: LogScaleBounds) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (bounds.lo, bounds.hi);
    let g = |t: f64| f(t.exp());
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while (b - a).abs() > 1e-12 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = g(d);
        }
    }
    // the interior optimum can lose to an endpoint on non-unimodal data
    let mid = 0.5 * (a + b);
    [mid, bounds.lo, bounds.hi]
        .into_iter()
        .min_by(|x, y| g(*x).total_cmp(&g(*y)))
        .map(f64::exp)
        .unwrap_or(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledLoss {
    pub loss: f64,
    pub scale: f64,
}

fn check_dims(w: usize, h: usize, other: (usize, usize), what: &str) -> Result<()> {
    if (w, h) != other {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {w}x{h}",
            other.0, other.1
        )));
    }
    Ok(())
}

/// Masked RGB samples as `f64`, in pixel order.
fn masked_samples(img: &HdrImage, mask: Option<&BinaryMask>) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if mask.is_none_or(|m| m.get(x, y)) {
                out.extend(img.pixel_f64(x, y));
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `min_c mean ‖gt − c·pred‖²` over masked pixels and channels.
pub fn scale_invariant_l2(pred: &HdrImage, gt: &HdrImage, mask: Option<&BinaryMask>) -> Result<ScaledLoss> {
    check_dims(gt.width(), gt.height(), (pred.width(), pred.height()), "prediction")?;
    if let Some(m) = mask {
        check_dims(gt.width(), gt.height(), (m.width(), m.height()), "mask")?;
    }
    let p = masked_samples(pred, mask);
    let g = masked_samples(gt, mask);
    if p.is_empty() {
        return Err(Error::InvalidValue("mask selects no pixels".into()));
    }
    let pp = dot(&p, &p);
    let scale = if pp > 0.0 { dot(&g, &p) / pp } else { 0.0 };
    let loss = p.iter().zip(&g).map(|(p, g)| (g - scale * p).powi(2)).sum::<f64>() / p.len() as f64;
    Ok(ScaledLoss { loss, scale })
}

/// `‖log(D+1) − log(c·D̃+1)‖² / |mask|` minimized over `c` within `bounds`.
///
/// The mask is normally the union of the object and area-light masks.
pub fn log_encoded_depth_loss(
    gt: &ScalarImage,
    pred: &ScalarImage,
    mask: &BinaryMask,
    bounds: LogScaleBounds,
) -> Result<ScaledLoss> {
    let (w, h) = (gt.width(), gt.height());
    check_dims(w, h, (pred.width(), pred.height()), "predicted depth")?;
    check_dims(w, h, (mask.width(), mask.height()), "mask")?;
    let mut pairs = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let (d, p) = (gt.get(x, y) as f64, pred.get(x, y) as f64);
            if d <= 0.0 || p <= 0.0 {
                return Err(Error::InvalidValue(format!("nonpositive depth at ({x}, {y})")));
            }
            pairs.push((d.ln_1p(), p));
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidValue("mask selects no pixels".into()));
    }
    let n = pairs.len() as f64;
    let loss_at = |c: f64| pairs.iter().map(|(ld, p)| (ld - (c * p).ln_1p()).powi(2)).sum::<f64>() / n;
    let scale = golden_log_scale(loss_at, bounds);
    Ok(ScaledLoss {
        loss: loss_at(scale),
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderLoss {
    pub loss: f64,
    pub c_diff: f64,
    pub c_spec: f64,
    /// The normal equations were singular and only `I_d` was regressed.
    pub singular: bool,
}

/// Nonnegative least squares for `I ≈ a·d + b·s` on sample vectors.
fn nnls2(i: &[f64], d: &[f64], s: &[f64]) -> (f64, f64, bool) {
    let (dd, ss, ds) = (dot(d, d), dot(s, s), dot(d, s));
    let (id, is) = (dot(i, d), dot(i, s));
    let single = |num: f64, den: f64| if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    let det = dd * ss - ds * ds;
    if !(det > 1e-12 * dd * ss) {
        return (single(id, dd), 0.0, true);
    }
    let a = (id * ss - is * ds) / det;
    let b = (is * dd - id * ds) / det;
    if a >= 0.0 && b >= 0.0 {
        return (a, b, false);
    }
    // optimum on the boundary of the nonnegative quadrant
    let residual = |a: f64, b: f64| dot(i, i) - 2.0 * (a * id + b * is) + a * a * dd + 2.0 * a * b * ds + b * b * ss;
    let only_d = (single(id, dd), 0.0);
    let only_s = (0.0, single(is, ss));
    let (a, b) = if residual(only_d.0, only_d.1) <= residual(only_s.0, only_s.1) {
        only_d
    } else {
        only_s
    };
    (a, b, false)
}

/// Scale-invariant rendering loss: `I ≈ c_diff·I_d + c_spec·I_s` with
/// nonnegative coefficients, mean squared residual over the mask.
pub fn render_loss(i: &HdrImage, i_d: &HdrImage, i_s: &HdrImage, mask: Option<&BinaryMask>) -> Result<RenderLoss> {
    let (w, h) = (i.width(), i.height());
    check_dims(w, h, (i_d.width(), i_d.height()), "diffuse image")?;
    check_dims(w, h, (i_s.width(), i_s.height()), "specular image")?;
    if let Some(m) = mask {
        check_dims(w, h, (m.width(), m.height()), "mask")?;
    }
    let (iv, dv, sv) = (masked_samples(i, mask), masked_samples(i_d, mask), masked_samples(i_s, mask));
    if iv.is_empty() {
        return Err(Error::InvalidValue("mask selects no pixels".into()));
    }
    let (c_diff, c_spec, singular) = nnls2(&iv, &dv, &sv);
    let loss = iv
        .iter()
        .zip(&dv)
        .zip(&sv)
        .map(|((i, d), s)| (i - c_diff * d - c_spec * s).powi(2))
        .sum::<f64>()
        / iv.len() as f64;
    Ok(RenderLoss {
        loss,
        c_diff,
        c_spec,
        singular,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgParamLosses {
    pub sharpness: Vec<f64>,
    pub axis: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Shared scale applied to predicted sharpness.
    pub sharpness_scale: f64,
    /// Shared scale applied to predicted intensities.
    pub intensity_scale: f64,
}

/// Per-lobe losses between region-aligned predicted and reference lobes.
///
/// Axes use a plain squared distance; sharpness and intensity use the
/// log-encoded form with one scale shared by all lobes.
pub fn sg_param_losses(pred: &SgEnvironment, gt: &SgEnvironment) -> Result<SgParamLosses> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted lobes vs {} reference lobes",
            pred.len(),
            gt.len()
        )));
    }
    let pairs: Vec<_> = pred.lobes().iter().zip(gt.lobes()).collect();
    let axis = pairs.iter().map(|(p, g)| (p.axis - g.axis).dot(p.axis - g.axis)).collect();

    let lambda_term = |c: f64, p: f64, g: f64| (g.ln_1p() - (c * p).ln_1p()).powi(2);
    let sharpness_scale = golden_log_scale(
        |c| pairs.iter().map(|(p, g)| lambda_term(c, p.sharpness, g.sharpness)).sum(),
        LogScaleBounds::default(),
    );
    let sharpness = pairs
        .iter()
        .map(|(p, g)| lambda_term(sharpness_scale, p.sharpness, g.sharpness))
        .collect();

    let intensity_term = |c: f64, p: &[f64; 3], g: &[f64; 3]| -> f64 { (0..3).map(|k| lambda_term(c, p[k], g[k])).sum() };
    let intensity_scale = golden_log_scale(
        |c| pairs.iter().map(|(p, g)| intensity_term(c, &p.intensity, &g.intensity)).sum(),
        LogScaleBounds::default(),
    );
    let intensity = pairs
        .iter()
        .map(|(p, g)| intensity_term(intensity_scale, &p.intensity, &g.intensity))
        .collect();

    Ok(SgParamLosses {
        sharpness,
        axis,
        intensity,
        sharpness_scale,
        intensity_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub albedo: f64,
    pub normal: f64,
    pub roughness: f64,
    pub depth: f64,
    pub lighting: f64,
    pub render: f64,
    pub sharpness: f64,
    pub axis: f64,
    pub intensity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            albedo: 1.5,
            normal: 1.0,
            roughness: 0.5,
            depth: 0.5,
            lighting: 10.0,
            render: 10.0,
            sharpness: 5e-4,
            axis: 1.0,
            intensity: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.albedo,
            self.normal,
            self.roughness,
            self.depth,
            self.lighting,
            self.render,
            self.sharpness,
            self.axis,
            self.intensity,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidValue("loss weights must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Individual loss terms; the per-lobe vectors may be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossComponents {
    pub albedo: f64,
    pub normal: f64,
    pub roughness: f64,
    pub depth: f64,
    pub lighting: f64,
    pub render: f64,
    pub sharpness: Vec<f64>,
    pub axis: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl LossComponents {
    pub fn with_lobes(mut self, lobes: &SgParamLosses) -> Self {
        self.sharpness = lobes.sharpness.clone();
        self.axis = lobes.axis.clone();
        self.intensity = lobes.intensity.clone();
        self
    }
}

/// Weighted sum of every component.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    w.albedo * c.albedo
        + w.normal * c.normal
        + w.roughness * c.roughness
        + w.depth * c.depth
        + w.lighting * c.lighting
        + w.render * c.render
        + w.sharpness * c.sharpness.iter().sum::<f64>()
        + w.axis * c.axis.iter().sum::<f64>()
        + w.intensity * c.intensity.iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleBranch {
    Specular,
    AlbedoMax,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSolution {
    pub c_d: f64,
    pub c_s: f64,
    /// Albedo scale.
    pub c_a: f64,
    /// Lighting scale.
    pub c_l: f64,
    pub branch: ScaleBranch,
    pub determinant: f64,
    pub warning: Option<String>,
}

/// Resolves the albedo/lighting scale ambiguity from a rendered decomposition.
///
/// When the diffuse and specular renders are independent enough
/// (`𝒟 > 1e-7`) the specular coefficient fixes the lighting scale.
/// Otherwise the albedo is normalized so its maximum is one, with `c_d`
/// regressed on `I_d` alone.
pub fn resolve_scales(
    i: &HdrImage,
    i_d: &HdrImage,
    i_s: &HdrImage,
    albedo: &HdrImage,
    mask: Option<&BinaryMask>,
) -> Result<ScaleSolution> {
    let fit = render_loss(i, i_d, i_s, mask)?;
    check_dims(i.width(), i.height(), (albedo.width(), albedo.height()), "albedo")?;
    let (dv, sv) = (masked_samples(i_d, mask), masked_samples(i_s, mask));
    let k = (dv.len() / 3) as f64;
    let (dd, ss, ds) = (dot(&dv, &dv), dot(&sv, &sv), dot(&dv, &sv));
    let determinant = ((dd * ss - ds * ds) / k).max(0.0);

    let mut warning = None;
    if determinant > DETERMINANT_THRESHOLD {
        if fit.c_spec > 0.0 {
            return Ok(ScaleSolution {
                c_d: fit.c_diff,
                c_s: fit.c_spec,
                c_a: fit.c_diff / fit.c_spec,
                c_l: fit.c_spec,
                branch: ScaleBranch::Specular,
                determinant,
                warning: None,
            });
        }
        let msg = "specular coefficient is zero; falling back to albedo normalization".to_string();
        warn!("{msg}");
        warning = Some(msg);
    }

    let max_a = masked_samples(albedo, mask).into_iter().fold(0.0, f64::max);
    if max_a <= 0.0 {
        return Err(Error::InvalidValue("albedo is zero everywhere under the mask".into()));
    }
    let iv = masked_samples(i, mask);
    let c_d = if dd > 0.0 { (dot(&iv, &dv) / dd).max(0.0) } else { 0.0 };
    Ok(scale_fallback(c_d, fit.c_spec, max_a, determinant, warning))
}

/// Albedo-max branch: `c_a = 1 / max(A)`, `c_l = c_d / c_a`.
pub fn scale_fallback(c_d: f64, c_s: f64, max_albedo: f64, determinant: f64, warning: Option<String>) -> ScaleSolution {
    let c_a = 1.0 / max_albedo;
    ScaleSolution {
        c_d,
        c_s,
        c_a,
        c_l: c_d / c_a,
        branch: ScaleBranch::AlbedoMax,
        determinant,
        warning,
    }
}
