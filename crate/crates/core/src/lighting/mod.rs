//! Directional lighting representations.
//!
//! * [`SgEnvironment`]: a mixture of isotropic spherical Gaussians,
//!   `L(η) = Σ F_k · exp(-λ_k (1 - η·ξ_k))`.
//! * [`EnvMapGrid`]: radiance tabulated on an elevation × azimuth grid.
//! * [`ShCoeffs`]: real spherical-harmonics expansion, used as a baseline.
//!
//! Directions use `θ` measured from `+z` and `φ` measured from `+x` toward `+y`.

mod grid;
mod sg;
mod sh;

pub use grid::{grid_direction, sg_to_grid, EnvMapGrid, GridDomain};
pub(crate) use sg::{parse_lobe_line, write_lobe_line};
pub use sg::{eval_sg, raw_to_hdr, RawSgLobe, SgEnvironment, SgLobe, MAX_LOBES};
pub use sh::{sh_basis, sh_eval, sh_project, ShCoeffs, DEFAULT_SH_ORDER};

use crate::math::{Rgb, Vec3};

/// Anything that can report incident radiance from a world-space direction.
pub trait Radiance: Sync {
    fn radiance(&self, dir: Vec3) -> Rgb;
}

impl<T: Radiance + ?Sized> Radiance for &T {
    fn radiance(&self, dir: Vec3) -> Rgb {
        (**self).radiance(dir)
    }
}
