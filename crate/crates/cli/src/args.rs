use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lumenforge", version, about = "Inverse-rendering toolkit: SG lighting, rendering layer, compositing, tileable textures")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Emit reports as JSON instead of key-value text.
    #[arg(long, global = true)]
    pub json: bool,

    /// Display gamma for PNG inputs and outputs.
    #[arg(long, global = true, default_value_t = 2.2)]
    pub gamma: f32,

    /// Fresnel term without the F0 offset, or with the additive F0 of the Schlick form.
    #[arg(long, global = true, value_enum, default_value_t = Fresnel::AsWritten)]
    pub fresnel: Fresnel,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit spherical Gaussian lobes to an environment map.
    FitSg(FitSgArgs),
    /// Render diffuse and specular images from a G-buffer.
    Render(RenderArgs),
    /// Insert a sphere into a photo by ratio compositing.
    Insert(InsertArgs),
    /// Replace the material inside a region and re-render it.
    EditMaterial(EditMaterialArgs),
    /// Change the roughness inside a region, keeping the photo's residual.
    EditSpecular(EditSpecularArgs),
    /// Make a tileable albedo/normal/roughness triple.
    Tile(TileArgs),
    /// Compare the SG fit with an SH projection of an environment map.
    CompareShSg(CompareArgs),
    /// Evaluate the weighted loss suite between two scene directories.
    EvalLoss(EvalLossArgs),
    /// Sample roughness values conditioned on Phong parameters.
    MatmapSample(MatmapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Domain {
    Hemisphere,
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fresnel {
    AsWritten,
    WithF0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    Modular,
    Grid,
}

#[derive(Debug, Args)]
pub struct FitSgArgs {
    /// Environment map (PFM); rows are elevation, columns azimuth.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub lobes: usize,
    /// Output lobe file, one lobe per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of iteration, loss and gradient norm.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Domain::Hemisphere)]
    pub domain: Domain,
    #[arg(long, value_enum, default_value_t = Layout::Modular)]
    pub layout: Layout,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Directory with albedo.pfm, normal.pfm, roughness.pfm, depth.pfm and optional mask.png.
    #[arg(long)]
    pub gbuffer: PathBuf,
    /// Lighting file, or a directory holding lights.txt.
    #[arg(long)]
    pub lights: PathBuf,
    #[arg(long)]
    pub out_diffuse: PathBuf,
    #[arg(long)]
    pub out_specular: PathBuf,
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = 63.4)]
    pub fov: f64,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Photo to edit (PFM or PNG).
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub gbuffer: PathBuf,
    #[arg(long)]
    pub lights: PathBuf,
    /// Output image (PNG or PFM by extension).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 63.4)]
    pub fov: f64,
}

#[derive(Debug, Args)]
pub struct InsertArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Insertion pixel as `x,y`.
    #[arg(long)]
    pub at: String,
    /// Object description, `sphere:<radius>`.
    #[arg(long)]
    pub object: String,
    /// Object albedo as `r,g,b`.
    #[arg(long, default_value = "0.8,0.8,0.8")]
    pub albedo: String,
    /// Object roughness.
    #[arg(long, default_value_t = 0.3)]
    pub rough: f64,
    /// Pixels of the supporting plane; defaults to the G-buffer mask.
    #[arg(long)]
    pub plane_mask: Option<PathBuf>,
    /// Also write the with-object and plane-only renders next to `--out`.
    #[arg(long)]
    pub keep_layers: bool,
}

#[derive(Debug, Args)]
pub struct EditMaterialArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Binary PNG selecting the edited pixels.
    #[arg(long)]
    pub region: PathBuf,
    /// New albedo as `r,g,b`.
    #[arg(long)]
    pub albedo: Option<String>,
    /// New roughness.
    #[arg(long)]
    pub rough: Option<f64>,
    /// Albedo texture tiled over the region.
    #[arg(long)]
    pub albedo_texture: Option<PathBuf>,
    /// Roughness texture tiled over the region.
    #[arg(long)]
    pub rough_texture: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EditSpecularArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub region: PathBuf,
    /// Roughness after the edit.
    #[arg(long)]
    pub rough: f64,
}

#[derive(Debug, Args)]
pub struct TileArgs {
    #[arg(long)]
    pub albedo: PathBuf,
    #[arg(long)]
    pub normal: PathBuf,
    #[arg(long)]
    pub rough: PathBuf,
    /// Patch side in pixels; omitted means one half of the shorter side.
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub overlap: Option<usize>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Domain::Hemisphere)]
    pub domain: Domain,
}

#[derive(Debug, Args)]
pub struct EvalLossArgs {
    /// Reference scene directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// Predicted scene directory.
    #[arg(long)]
    pub pred: PathBuf,
    /// TOML file overriding loss weights.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 63.4)]
    pub fov: f64,
}

#[derive(Debug, Args)]
pub struct MatmapArgs {
    /// Observations CSV (`phong_exponent,phong_intensity,roughness`).
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    pub observations: Option<PathBuf>,
    /// Previously saved table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Write the built table here.
    #[arg(long)]
    pub save_table: Option<PathBuf>,
    /// Phong key as `exponent_decile,intensity_decile`.
    #[arg(long, conflicts_with_all = ["exponent", "intensity"])]
    pub key: Option<String>,
    /// Raw Phong exponent, binned with the table's deciles.
    #[arg(long, requires = "intensity")]
    pub exponent: Option<f64>,
    /// Raw Phong intensity.
    #[arg(long, requires = "exponent")]
    pub intensity: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Write one sample per line here instead of into the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
