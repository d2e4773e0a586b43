use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lumenforge::brdf::{BrdfConfig, FresnelVariant};
use lumenforge::compare::{compare_sh_sg, CompareConfig};
use lumenforge::composite::{
    edit_material, edit_specularity, insert_object, InsertionConfig, MaterialEdit, SphereObject,
};
use lumenforge::imaging::{ldr_to_linear_with_gamma, read_pfm, read_png_ldr, read_png_luma, BinaryMask, HdrImage};
use lumenforge::lighting::{sg_to_grid, EnvMapGrid, GridDomain};
use lumenforge::matmap::{build_conditional, read_observations, ConditionalTable, PhongKey};
use lumenforge::objective::{
    log_encoded_depth_loss, render_loss, scale_invariant_l2, sg_param_losses, total_loss, LogScaleBounds,
    LossComponents, LossWeights,
};
use lumenforge::renderlayer::{build_quadrature, render_image, Camera, GBuffer, LightingGrid};
use lumenforge::sgfit::{fit_grid, log_grid_loss, CellWeighting, RegionLayout, SgFitConfig};
use lumenforge::texsynth::{
    make_tileable, tiling_seam_energy, SvbrdfTexture, TexSynthConfig, Window,
};

use crate::args::*;
use crate::io::*;
use crate::report::Report;

/// Resolution at which per-pixel lobes are compared as environment maps.
const LIGHTING_ROWS: usize = 16;
const LIGHTING_COLS: usize = 32;

/// Options shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub gamma: f32,
    pub brdf: BrdfConfig,
}

impl Ctx {
    pub fn new(cli: &Cli) -> Result<Self> {
        if !(cli.gamma > 0.0 && cli.gamma.is_finite()) {
            return Err(usage(format!("gamma {} must be positive", cli.gamma)));
        }
        let fresnel = match cli.fresnel {
            Fresnel::AsWritten => FresnelVariant::AsWritten,
            Fresnel::WithF0 => FresnelVariant::WithF0Offset,
        };
        Ok(Ctx {
            seed: cli.seed,
            gamma: cli.gamma,
            brdf: BrdfConfig {
                fresnel,
                ..BrdfConfig::default()
            },
        })
    }
}

fn domain(d: Domain) -> GridDomain {
    match d {
        Domain::Hemisphere => GridDomain::Hemisphere,
        Domain::Sphere => GridDomain::Sphere,
    }
}

fn camera(fov: f64) -> Result<Camera> {
    Camera::new(fov).map_err(|e| usage(e.to_string()))
}

fn unit_interval(v: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(usage(format!("{what} {v} must lie in [0, 1]")));
    }
    Ok(())
}

pub fn fit_sg(a: &FitSgArgs) -> Result<Report> {
    require_file(&a.input, "input")?;
    require_output(&a.out, "output")?;
    if let Some(t) = &a.trace {
        require_output(t, "trace")?;
    }
    let mut cfg = SgFitConfig {
        lobe_count: a.lobes,
        layout: match a.layout {
            Layout::Modular => RegionLayout::Modular,
            Layout::Grid => RegionLayout::Grid,
        },
        ..SgFitConfig::default()
    };
    if let Some(n) = a.max_iterations {
        cfg.max_iterations = n;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let grid = EnvMapGrid::from_image(&read_pfm(&a.input)?, domain(a.domain))?;
    let fit = fit_grid(&grid, &cfg)?;
    fit.env.write(&a.out)?;
    if let Some(t) = &a.trace {
        let mut csv = String::from("iteration,loss,gradient_norm\n");
        for p in &fit.trace {
            csv += &format!("{},{:e},{:e}\n", p.iteration, p.loss, p.gradient_norm);
        }
        fs::write(t, csv).with_context(|| format!("writing {}", t.display()))?;
    }
    let mut r = Report::new();
    r.add("lobes", fit.env.len())
        .add("loss", fit.loss)
        .add("iterations", fit.iterations)
        .add("termination", format!("{:?}", fit.termination))
        .add("line_search_warning", fit.line_search_warning);
    Ok(r)
}

fn mean_rgb(img: &HdrImage) -> f64 {
    img.data().iter().map(|v| *v as f64).sum::<f64>() / img.data().len() as f64
}

pub fn render(a: &RenderArgs, ctx: &Ctx) -> Result<Report> {
    require_dir(&a.gbuffer, "G-buffer")?;
    let lights = lights_path(&a.lights)?;
    for (p, what) in [(&a.out_diffuse, "diffuse output"), (&a.out_specular, "specular output")] {
        require_output(p, what)?;
        if image_format(p, what)? != ImageFormat::Pfm {
            return Err(usage(format!("{what} must be a .pfm file")));
        }
    }
    let cam = camera(a.fov)?;

    let g = GBuffer::read_dir(&a.gbuffer)?;
    let grid = read_lights(&lights)?;
    let out = render_image(&g, &grid, &cam, &build_quadrature(), &ctx.brdf)?;
    write_image(&out.diffuse, &a.out_diffuse, ctx.gamma)?;
    write_image(&out.specular, &a.out_specular, ctx.gamma)?;
    let mut r = Report::new();
    r.add("width", g.width())
        .add("height", g.height())
        .add("mean_diffuse", mean_rgb(&out.diffuse))
        .add("mean_specular", mean_rgb(&out.specular));
    Ok(r)
}

struct Scene {
    image: HdrImage,
    g: GBuffer,
    lights: LightingGrid,
    camera: Camera,
}

fn check_scene(s: &SceneArgs) -> Result<PathBuf> {
    require_file(&s.image, "image")?;
    image_format(&s.image, "image")?;
    require_dir(&s.gbuffer, "G-buffer")?;
    let lights = lights_path(&s.lights)?;
    require_output(&s.out, "output")?;
    image_format(&s.out, "output")?;
    Ok(lights)
}

fn load_scene(s: &SceneArgs, lights: &Path, gamma: f32) -> Result<Scene> {
    let camera = camera(s.fov)?;
    let image = read_image(&s.image, gamma)?;
    let g = GBuffer::read_dir(&s.gbuffer)?;
    if (image.width(), image.height()) != (g.width(), g.height()) {
        bail!(
            "image is {}x{} but the G-buffer is {}x{}",
            image.width(),
            image.height(),
            g.width(),
            g.height()
        );
    }
    Ok(Scene {
        image,
        g,
        lights: read_lights(lights)?,
        camera,
    })
}

fn sphere_radius(spec: &str) -> Result<f64> {
    let r = spec
        .strip_prefix("sphere:")
        .ok_or_else(|| usage(format!("object `{spec}` must be `sphere:<radius>`")))?;
    let r: f64 = r.parse().map_err(|_| usage(format!("sphere radius `{r}` is not a number")))?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(usage(format!("sphere radius {r} must be finite and non-negative")));
    }
    Ok(r)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    out.with_file_name(format!("{stem}_{suffix}.pfm"))
}

pub fn insert(a: &InsertArgs, ctx: &Ctx) -> Result<Report> {
    let lights = check_scene(&a.scene)?;
    let [x, y] = parse_list::<2, usize>(&a.at, "insertion point")?;
    let radius = sphere_radius(&a.object)?;
    let albedo = parse_list::<3, f64>(&a.albedo, "albedo")?;
    for v in albedo {
        unit_interval(v, "albedo")?;
    }
    unit_interval(a.rough, "roughness")?;
    if let Some(m) = &a.plane_mask {
        require_file(m, "plane mask")?;
    }

    let scene = load_scene(&a.scene, &lights, ctx.gamma)?;
    let (w, h) = (scene.g.width(), scene.g.height());
    let plane = match (&a.plane_mask, &scene.g.mask) {
        (Some(p), _) => BinaryMask::read_png(p)?,
        (None, Some(m)) => m.clone(),
        (None, None) => BinaryMask::filled(w, h, true),
    };
    let object = SphereObject {
        radius,
        albedo,
        roughness: a.rough,
    };
    let cfg = InsertionConfig {
        camera: scene.camera,
        brdf: ctx.brdf,
        ..InsertionConfig::default()
    };
    let out = insert_object(&scene.g, &scene.lights, &plane, (x, y), &object, &scene.image, &cfg)?;
    write_image(&out.composite, &a.scene.out, ctx.gamma)?;
    if a.keep_layers {
        write_image(&out.setup.with_object, &sibling(&a.scene.out, "with_object"), ctx.gamma)?;
        write_image(&out.setup.plane_only, &sibling(&a.scene.out, "plane_only"), ctx.gamma)?;
    }
    let mut r = Report::new();
    r.add("object_pixels", out.setup.object_mask.count())
        .add("plane_pixels", out.setup.combined_mask.count() - out.setup.object_mask.count());
    Ok(r)
}

fn read_region(p: &Path, g: &GBuffer) -> Result<BinaryMask> {
    let m = BinaryMask::read_png(p)?;
    if (m.width(), m.height()) != (g.width(), g.height()) {
        bail!("region mask is {}x{} but the G-buffer is {}x{}", m.width(), m.height(), g.width(), g.height());
    }
    Ok(m)
}

pub fn edit_material_cmd(a: &EditMaterialArgs, ctx: &Ctx) -> Result<Report> {
    let lights = check_scene(&a.scene)?;
    require_file(&a.region, "region mask")?;
    let albedo = a.albedo.as_deref().map(|s| parse_list::<3, f64>(s, "albedo")).transpose()?;
    for v in albedo.iter().flatten() {
        unit_interval(*v, "albedo")?;
    }
    if let Some(r) = a.rough {
        unit_interval(r, "roughness")?;
    }
    for p in [&a.albedo_texture, &a.rough_texture].into_iter().flatten() {
        require_file(p, "texture")?;
    }
    if albedo.is_none() && a.rough.is_none() && a.albedo_texture.is_none() && a.rough_texture.is_none() {
        return Err(usage("give at least one of --albedo, --rough, --albedo-texture, --rough-texture"));
    }

    let scene = load_scene(&a.scene, &lights, ctx.gamma)?;
    let region = read_region(&a.region, &scene.g)?;
    let edit = MaterialEdit {
        albedo,
        roughness: a.rough,
        albedo_texture: a.albedo_texture.as_deref().map(|p| read_png_ldr(p).map(|i| ldr_to_linear_with_gamma(&i, ctx.gamma))).transpose()?,
        roughness_texture: a.rough_texture.as_deref().map(read_png_luma).transpose()?,
    };
    let out = edit_material(
        &scene.g,
        &scene.lights,
        &region,
        &edit,
        &scene.image,
        &scene.camera,
        &build_quadrature(),
        &ctx.brdf,
    )?;
    write_image(&out, &a.scene.out, ctx.gamma)?;
    let mut r = Report::new();
    r.add("edited_pixels", region.count());
    Ok(r)
}

pub fn edit_specular_cmd(a: &EditSpecularArgs, ctx: &Ctx) -> Result<Report> {
    let lights = check_scene(&a.scene)?;
    require_file(&a.region, "region mask")?;
    unit_interval(a.rough, "roughness")?;

    let scene = load_scene(&a.scene, &lights, ctx.gamma)?;
    let region = read_region(&a.region, &scene.g)?;
    let out = edit_specularity(
        &scene.g,
        &scene.lights,
        &region,
        a.rough,
        &scene.image,
        &scene.camera,
        &build_quadrature(),
        &ctx.brdf,
    )?;
    write_image(&out, &a.scene.out, ctx.gamma)?;
    let mut r = Report::new();
    r.add("edited_pixels", region.count()).add("roughness", a.rough);
    Ok(r)
}

pub fn tile(a: &TileArgs) -> Result<Report> {
    for (p, what) in [(&a.albedo, "albedo"), (&a.normal, "normal map"), (&a.rough, "roughness map")] {
        require_file(p, what)?;
    }
    let parent = a.out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() || a.out.is_file() {
        return Err(usage(format!("output directory `{}` cannot be created", a.out.display())));
    }
    let cfg = TexSynthConfig {
        overlap_width: a.overlap,
        ..TexSynthConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let tex = SvbrdfTexture::read_png(&a.albedo, &a.normal, &a.rough)?;
    let patch = a.patch.unwrap_or(tex.width().min(tex.height()) / 2);
    let t = make_tileable(&tex, patch, &cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    t.texture.write_png(&a.out)?;
    lumenforge::imaging::write_png_ldr(&t.texture.tiled(3, 3).albedo_image()?, a.out.join("preview.png"))?;

    let c = ((tex.width() - patch) / 2, (tex.height() - patch) / 2);
    let naive = tex.crop(Window::square(c.0, c.1, patch))?;
    let mut r = Report::new();
    r.add("patch", patch)
        .add("overlap", t.overlap)
        .add("window_x", t.window.x)
        .add("window_y", t.window.y)
        .add("horizontal_seam_cost", t.horizontal_seam.cost)
        .add("vertical_seam_cost", t.vertical_seam.cost)
        .add("tiling_energy", tiling_seam_energy(&t.texture, 3, &cfg))
        .add("centre_crop_tiling_energy", tiling_seam_energy(&naive, 3, &cfg));
    Ok(r)
}

pub fn compare(a: &CompareArgs) -> Result<Report> {
    require_file(&a.input, "input")?;
    let grid = EnvMapGrid::from_image(&read_pfm(&a.input)?, domain(a.domain))?;
    let rep = compare_sh_sg(&grid, &CompareConfig::default())?;
    let mut r = Report::new();
    r.add("sg_log_loss", rep.sg_log_loss)
        .add("sh_log_loss", rep.sh_log_loss)
        .add("sg_render_mse", rep.sg_render_mse)
        .add("sh_render_mse", rep.sh_render_mse);
    Ok(r)
}

fn masked_mean(g: &GBuffer, mask: Option<&BinaryMask>, f: impl Fn(usize, usize) -> f64) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..g.height() {
        for x in 0..g.width() {
            if mask.is_none_or(|m| m.get(x, y)) {
                sum += f(x, y);
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn eval_loss(a: &EvalLossArgs, ctx: &Ctx) -> Result<Report> {
    require_dir(&a.gt, "reference directory")?;
    require_dir(&a.pred, "prediction directory")?;
    let weights = match &a.weights {
        Some(p) => {
            require_file(p, "weights")?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let w: LossWeights = toml::from_str(&text).map_err(|e| usage(format!("weights `{}`: {e}", p.display())))?;
            w.validate().map_err(|e| usage(e.to_string()))?;
            w
        }
        None => LossWeights::default(),
    };
    let cam = camera(a.fov)?;

    let gt = GBuffer::read_dir(&a.gt)?;
    let pred = GBuffer::read_dir(&a.pred)?;
    if (gt.width(), gt.height()) != (pred.width(), pred.height()) {
        bail!("reference and prediction G-buffers differ in size");
    }
    let mask = gt.mask.clone();
    let (w, h) = (gt.width(), gt.height());
    let depth_mask = mask.clone().unwrap_or_else(|| BinaryMask::filled(w, h, true));
    let mut c = LossComponents {
        albedo: scale_invariant_l2(&pred.albedo, &gt.albedo, mask.as_ref())?.loss,
        normal: masked_mean(&gt, mask.as_ref(), |x, y| {
            let d = pred.normal(x, y) - gt.normal(x, y);
            d.dot(d)
        }),
        roughness: masked_mean(&gt, mask.as_ref(), |x, y| {
            (pred.roughness.get(x, y) as f64 - gt.roughness.get(x, y) as f64).powi(2)
        }),
        depth: log_encoded_depth_loss(&gt.depth, &pred.depth, &depth_mask, LogScaleBounds::default())?.loss,
        ..LossComponents::default()
    };

    let mut skipped = Vec::new();
    let (gt_lights, pred_lights) = (a.gt.join("lights.txt"), a.pred.join("lights.txt"));
    let pred_grid = pred_lights.is_file().then(|| read_lights(&pred_lights)).transpose()?;
    match (gt_lights.is_file(), &pred_grid) {
        (true, Some(pg)) => {
            let gg = read_lights(&gt_lights)?;
            if (gg.rows(), gg.cols()) != (pg.rows(), pg.cols()) {
                bail!("lighting grids differ: {}x{} vs {}x{}", gg.rows(), gg.cols(), pg.rows(), pg.cols());
            }
            let cells = gg.cells().len() as f64;
            let mut lobe_sums: Option<[Vec<f64>; 3]> = None;
            for (g_env, p_env) in gg.cells().iter().zip(pg.cells()) {
                let to_grid = |e| sg_to_grid(e, LIGHTING_ROWS, LIGHTING_COLS, GridDomain::Hemisphere);
                c.lighting += log_grid_loss(&to_grid(p_env)?, &to_grid(g_env)?, CellWeighting::SolidAngle)? / cells;
                let l = sg_param_losses(p_env, g_env)?;
                let acc = lobe_sums.get_or_insert_with(|| [0; 3].map(|_| vec![0.0; l.axis.len()]));
                for (sum, part) in acc.iter_mut().zip([&l.sharpness, &l.axis, &l.intensity]) {
                    for (s, v) in sum.iter_mut().zip(part) {
                        *s += v / cells;
                    }
                }
            }
            if let Some([s, x, f]) = lobe_sums {
                (c.sharpness, c.axis, c.intensity) = (s, x, f);
            }
        }
        _ => skipped.push("lighting"),
    }
    let image = a.gt.join("image.pfm");
    match (&pred_grid, image.is_file()) {
        (Some(pg), true) => {
            let photo = read_pfm(&image)?;
            let out = render_image(&pred, pg, &cam, &build_quadrature(), &ctx.brdf)?;
            c.render = render_loss(&photo, &out.diffuse, &out.specular, mask.as_ref())?.loss;
        }
        _ => skipped.push("render"),
    }

    let mut r = Report::new();
    r.add("albedo", c.albedo)
        .add("normal", c.normal)
        .add("roughness", c.roughness)
        .add("depth", c.depth)
        .add("lighting", c.lighting)
        .add("render", c.render)
        .add("sharpness", c.sharpness.iter().sum::<f64>())
        .add("axis", c.axis.iter().sum::<f64>())
        .add("intensity", c.intensity.iter().sum::<f64>())
        .add("total", total_loss(&c, &weights));
    if !skipped.is_empty() {
        r.add("skipped", skipped.join(","));
    }
    Ok(r)
}

pub fn matmap_sample(a: &MatmapArgs, ctx: &Ctx) -> Result<Report> {
    if let Some(p) = &a.observations {
        require_file(p, "observations")?;
    }
    if let Some(p) = &a.table {
        require_file(p, "table")?;
    }
    for p in [&a.save_table, &a.out].into_iter().flatten() {
        require_output(p, "output")?;
    }
    let key = a.key.as_deref().map(|k| parse_list::<2, u8>(k, "key")).transpose()?;
    if key.is_none() && a.exponent.is_none() {
        return Err(usage("give --key or both --exponent and --intensity"));
    }

    let table = match (&a.observations, &a.table) {
        (Some(p), _) => build_conditional(&read_observations(p)?)?,
        (None, Some(p)) => ConditionalTable::read(p)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    if let Some(p) = &a.save_table {
        table.write(p)?;
    }
    let key = match (key, a.exponent, a.intensity) {
        (Some([e, i]), _, _) => PhongKey::new(e, i),
        (None, Some(e), Some(i)) => table.key_for(e, i)?,
        _ => unreachable!("clap pairs --exponent with --intensity"),
    };
    let samples = table.sample_many(key, a.count, ctx.seed)?;
    let mut r = Report::new();
    r.add("key", key.to_string()).add("count", samples.len());
    match &a.out {
        Some(p) => {
            let text: String = samples.iter().map(|v| format!("{v:?}\n")).collect();
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        None => {
            r.add("samples", samples);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lumenforge::math::Vec3;

    #[test]
    fn sphere_spec() {
        assert_eq!(sphere_radius("sphere:0.25").unwrap(), 0.25);
        assert!(sphere_radius("cube:1").is_err());
        assert!(sphere_radius("sphere:-1").is_err());
        assert!(sphere_radius("sphere:abc").is_err());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("out/comp.png"), "plane_only"), PathBuf::from("out/comp_plane_only.pfm"));
    }

    #[test]
    fn unit_vectors_unused_in_mean_of_empty_mask() {
        let g = GBuffer::uniform(2, 2, [0.5; 3], Vec3::Z, 0.5, 1.0).unwrap();
        let none = BinaryMask::filled(2, 2, false);
        assert_eq!(masked_mean(&g, Some(&none), |_, _| 1.0), 0.0);
        assert_eq!(masked_mean(&g, None, |x, _| x as f64), 0.5);
    }
}
