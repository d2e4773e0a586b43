//! Region-constrained spherical-Gaussian fitting of environment grids.
//!
//! Each lobe `k` is parameterized by unconstrained values
//! `(θ̂, φ̂, λ̂, F̂_rgb)` mapped through
//! `θ = a·tanh θ̂ + b_k`, `φ = c·tanh φ̂ + d_k`, `λ = exp λ̂`, `F = exp F̂`,
//! which keeps every lobe inside its assigned region of the hemisphere.
//! The fit minimizes a log-encoded loss with L-BFGS and analytic gradients.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use log::warn;

use crate::error::{Error, Result};
use crate::lbfgs::{lbfgs_minimize, LbfgsConfig, Termination, TracePoint};
use crate::lighting::{EnvMapGrid, SgEnvironment, SgLobe};
use crate::math::{Rgb, Vec3};

/// Scalars per lobe in the packed parameter vector.
pub const PARAMS_PER_LOBE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellWeighting {
    /// Cells weighted by `sin θ`, proportional to their solid angle.
    #[default]
    SolidAngle,
    Uniform,
}

/// How lobe indices map to region offsets `(b_k, d_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegionLayout {
    /// `b_k = π/4 (k mod 2 + ½)`, `d_k = π/3 (k mod 6 + ½) − π`.
    /// Lobes `k` and `k + 6` land in the same region.
    #[default]
    Modular,
    /// Row-major over `region_rows × region_cols`: `b` from `⌊k / cols⌋`,
    /// `d` from `k mod cols`. Every lobe gets its own region.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgFitConfig {
    pub lobe_count: usize,
    pub region_rows: usize,
    pub region_cols: usize,
    /// `a`: half-range of the elevation squash.
    pub theta_scale: f64,
    /// `c`: half-range of the azimuth squash.
    pub phi_scale: f64,
    pub lbfgs_history: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub weighting: CellWeighting,
    pub layout: RegionLayout,
}

impl Default for SgFitConfig {
    fn default() -> Self {
        SgFitConfig {
            lobe_count: 12,
            region_rows: 2,
            region_cols: 6,
            theta_scale: 3.0 * PI / 8.0,
            phi_scale: FRAC_PI_2,
            lbfgs_history: 10,
            max_iterations: 400,
            gradient_tolerance: 1e-6,
            weighting: CellWeighting::SolidAngle,
            layout: RegionLayout::Modular,
        }
    }
}

impl SgFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lobe_count == 0 || self.lobe_count > crate::lighting::MAX_LOBES {
            return Err(Error::InvalidValue(format!("lobe count {} out of range", self.lobe_count)));
        }
        if self.region_rows == 0 || self.region_cols == 0 {
            return Err(Error::InvalidValue("region grid must be nonempty".into()));
        }
        if self.layout == RegionLayout::Grid && self.lobe_count != self.region_rows * self.region_cols {
            return Err(Error::InvalidValue(format!(
                "{} lobes do not fill a {}x{} region grid",
                self.lobe_count, self.region_rows, self.region_cols
            )));
        }
        if !(self.theta_scale > 0.0 && self.phi_scale > 0.0) {
            return Err(Error::InvalidValue("angular scales must be positive".into()));
        }
        if self.lbfgs_history == 0 {
            return Err(Error::InvalidValue("L-BFGS history must be positive".into()));
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            history: self.lbfgs_history,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            ..LbfgsConfig::default()
        }
    }
}

/// Region offsets `(b_k, d_k)` for lobe `k`.
pub fn region_offsets(k: usize, cfg: &SgFitConfig) -> (f64, f64) {
    let (row, col) = match cfg.layout {
        RegionLayout::Modular => (k % 2, k % 6),
        RegionLayout::Grid => (k / cfg.region_cols, k % cfg.region_cols),
    };
    let b = FRAC_PI_4 * (row as f64 + 0.5);
    let d = FRAC_PI_3 * (col as f64 + 0.5) - PI;
    (b, d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedParams {
    pub theta_hat: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub intensity_hat: Vec<Rgb>,
}

impl UnconstrainedParams {
    /// `θ̂ = φ̂ = F̂ = 0`, `λ̂ = log(π/2)`.
    pub fn initial(lobe_count: usize) -> Self {
        UnconstrainedParams {
            theta_hat: vec![0.0; lobe_count],
            phi_hat: vec![0.0; lobe_count],
            lambda_hat: vec![FRAC_PI_2.ln(); lobe_count],
            intensity_hat: vec![[0.0; 3]; lobe_count],
        }
    }

    pub fn lobe_count(&self) -> usize {
        self.theta_hat.len()
    }

    /// Packs as `[θ̂, φ̂, λ̂, F̂r, F̂g, F̂b]` per lobe.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.lobe_count() * PARAMS_PER_LOBE);
        for k in 0..self.lobe_count() {
            v.extend_from_slice(&[self.theta_hat[k], self.phi_hat[k], self.lambda_hat[k]]);
            v.extend_from_slice(&self.intensity_hat[k]);
        }
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.is_empty() || v.len() % PARAMS_PER_LOBE != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values is not a whole number of lobes",
                v.len()
            )));
        }
        let mut p = UnconstrainedParams::initial(v.len() / PARAMS_PER_LOBE);
        for (k, chunk) in v.chunks_exact(PARAMS_PER_LOBE).enumerate() {
            p.theta_hat[k] = chunk[0];
            p.phi_hat[k] = chunk[1];
            p.lambda_hat[k] = chunk[2];
            p.intensity_hat[k] = [chunk[3], chunk[4], chunk[5]];
        }
        Ok(p)
    }

    fn all_finite(&self) -> bool {
        self.theta_hat
            .iter()
            .chain(&self.phi_hat)
            .chain(&self.lambda_hat)
            .chain(self.intensity_hat.iter().flatten())
            .all(|v| v.is_finite())
    }
}

/// Lobe geometry plus the Jacobian of the axis with respect to `(θ̂, φ̂)`.
struct LobeState {
    axis: Vec3,
    lambda: f64,
    intensity: Rgb,
    daxis_dtheta_hat: Vec3,
    daxis_dphi_hat: Vec3,
}

fn lobe_state(chunk: &[f64], k: usize, cfg: &SgFitConfig) -> LobeState {
    let (b, d) = region_offsets(k, cfg);
    let (tt, tp) = (chunk[0].tanh(), chunk[1].tanh());
    let theta = cfg.theta_scale * tt + b;
    let phi = cfg.phi_scale * tp + d;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let dtheta = cfg.theta_scale * (1.0 - tt * tt);
    let dphi = cfg.phi_scale * (1.0 - tp * tp);
    LobeState {
        axis: Vec3::new(st * cp, st * sp, ct),
        lambda: chunk[2].exp(),
        intensity: [chunk[3].exp(), chunk[4].exp(), chunk[5].exp()],
        daxis_dtheta_hat: Vec3::new(ct * cp, ct * sp, -st) * dtheta,
        daxis_dphi_hat: Vec3::new(-st * sp, st * cp, 0.0) * dphi,
    }
}

/// Maps unconstrained parameters to a lobe environment.
///
/// Lobe axes may dip below the horizon (`θ` up to `a + max b_k`); the loss
/// only ever evaluates them at directions inside the target grid's domain.
pub fn constrain(u: &UnconstrainedParams, cfg: &SgFitConfig) -> Result<SgEnvironment> {
    if !u.all_finite() {
        return Err(Error::InvalidValue("unconstrained parameters must be finite".into()));
    }
    let v = u.to_vec();
    let lobes = v
        .chunks_exact(PARAMS_PER_LOBE)
        .enumerate()
        .map(|(k, chunk)| {
            let s = lobe_state(chunk, k, cfg);
            SgLobe::new(s.axis, s.lambda, s.intensity)
        })
        .collect::<Result<Vec<_>>>()?;
    SgEnvironment::new(lobes)
}

fn cell_weights(target: &EnvMapGrid, weighting: CellWeighting) -> Vec<f64> {
    (0..target.rows())
        .map(|r| match weighting {
            CellWeighting::SolidAngle => target.theta(r).sin(),
            CellWeighting::Uniform => 1.0,
        })
        .collect()
}

/// Weighted mean over cells and channels of `(log(L̃+1) − log(L+1))²`.
pub fn log_grid_loss(pred: &EnvMapGrid, target: &EnvMapGrid, weighting: CellWeighting) -> Result<f64> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() || pred.domain() != target.domain() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} prediction vs {}x{} target",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let w = cell_weights(target, weighting);
    let (mut num, mut den) = (0.0, 0.0);
    for r in 0..target.rows() {
        for c in 0..target.cols() {
            let (p, t) = (pred.at(r, c), target.at(r, c));
            let e: f64 = (0..3).map(|k| (p[k].ln_1p() - t[k].ln_1p()).powi(2)).sum();
            num += w[r] * e;
            den += w[r] * 3.0;
        }
    }
    Ok(num / den)
}

/// [`log_grid_loss`] of `env` evaluated at the target's cell centres,
/// with solid-angle weighting.
pub fn fit_loss(env: &SgEnvironment, target: &EnvMapGrid) -> Result<f64> {
    fit_loss_weighted(env, target, CellWeighting::SolidAngle)
}

pub fn fit_loss_weighted(env: &SgEnvironment, target: &EnvMapGrid, weighting: CellWeighting) -> Result<f64> {
    let pred = crate::lighting::sg_to_grid(env, target.rows(), target.cols(), target.domain())?;
    log_grid_loss(&pred, target, weighting)
}

/// Precomputed target data for repeated loss evaluation.
struct FitProblem<'a> {
    cfg: &'a SgFitConfig,
    dirs: Vec<Vec3>,
    /// Per-cell weight already divided by `3 Σ w`.
    weights: Vec<f64>,
    log_target: Vec<Rgb>,
}

impl<'a> FitProblem<'a> {
    fn new(target: &EnvMapGrid, cfg: &'a SgFitConfig) -> Self {
        let row_w = cell_weights(target, cfg.weighting);
        let total: f64 = row_w.iter().sum::<f64>() * target.cols() as f64 * 3.0;
        let mut dirs = Vec::with_capacity(target.cells().len());
        let mut weights = Vec::with_capacity(target.cells().len());
        for r in 0..target.rows() {
            for c in 0..target.cols() {
                dirs.push(target.direction(r, c));
                weights.push(row_w[r] / total);
            }
        }
        let log_target = target.cells().iter().map(|t| t.map(f64::ln_1p)).collect();
        FitProblem {
            cfg,
            dirs,
            weights,
            log_target,
        }
    }

    /// Loss at packed parameters `x`; fills `grad` when given.
    fn evaluate(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let lobes: Vec<LobeState> = x
            .chunks_exact(PARAMS_PER_LOBE)
            .enumerate()
            .map(|(k, chunk)| lobe_state(chunk, k, self.cfg))
            .collect();
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut falloff = vec![0.0; lobes.len()];
        let mut loss = 0.0;
        for ((dir, w), lt) in self.dirs.iter().zip(&self.weights).zip(&self.log_target) {
            let mut pred = [0.0; 3];
            for (l, g) in lobes.iter().zip(falloff.iter_mut()) {
                *g = (-l.lambda * (1.0 - dir.dot(l.axis))).exp();
                for ch in 0..3 {
                    pred[ch] += l.intensity[ch] * *g;
                }
            }
            let mut coef = [0.0; 3];
            for ch in 0..3 {
                let r = pred[ch].ln_1p() - lt[ch];
                loss += w * r * r;
                coef[ch] = 2.0 * w * r / (pred[ch] + 1.0);
            }
            let Some(grad) = grad.as_deref_mut() else {
                continue;
            };
            for (k, (l, g)) in lobes.iter().zip(&falloff).enumerate() {
                let gk = &mut grad[k * PARAMS_PER_LOBE..(k + 1) * PARAMS_PER_LOBE];
                // s = Σ_ch coef·F·g is the sensitivity to the lobe's log-falloff
                let mut s = 0.0;
                for ch in 0..3 {
                    let t = coef[ch] * l.intensity[ch] * g;
                    gk[3 + ch] += t;
                    s += t;
                }
                gk[2] += -s * l.lambda * (1.0 - dir.dot(l.axis));
                let dxi = *dir * (s * l.lambda);
                gk[0] += dxi.dot(l.daxis_dtheta_hat);
                gk[1] += dxi.dot(l.daxis_dphi_hat);
            }
        }
        loss
    }
}

#[derive(Debug, Clone)]
pub struct SgFit {
    pub env: SgEnvironment,
    pub params: UnconstrainedParams,
    pub loss: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Set when the line search gave up and the best iterate was returned.
    pub line_search_warning: bool,
    pub trace: Vec<TracePoint>,
}

/// Fits `cfg.lobe_count` lobes to `target` from the standard initialization.
pub fn fit_grid(target: &EnvMapGrid, cfg: &SgFitConfig) -> Result<SgFit> {
    fit_grid_from(target, cfg, &UnconstrainedParams::initial(cfg.lobe_count))
}

pub fn fit_grid_from(target: &EnvMapGrid, cfg: &SgFitConfig, init: &UnconstrainedParams) -> Result<SgFit> {
    cfg.validate()?;
    if init.lobe_count() != cfg.lobe_count {
        return Err(Error::DimensionMismatch(format!(
            "{} initial lobes for a {}-lobe fit",
            init.lobe_count(),
            cfg.lobe_count
        )));
    }
    let problem = FitProblem::new(target, cfg);
    let result = lbfgs_minimize(|x, g| problem.evaluate(x, Some(g)), &init.to_vec(), &cfg.lbfgs())?;
    let line_search_warning = result.termination == Termination::LineSearchFailed;
    if line_search_warning {
        warn!(
            "SG fit line search failed after {} iterations; returning best iterate (loss {:.6e})",
            result.iterations, result.loss
        );
    }
    let params = UnconstrainedParams::from_slice(&result.x)?;
    let env = constrain(&params, cfg)?;
    Ok(SgFit {
        env,
        params,
        loss: result.loss,
        iterations: result.iterations,
        termination: result.termination,
        line_search_warning,
        trace: result.trace,
    })
}

/// Loss and analytic gradient at packed parameters, exposed for verification.
pub fn fit_objective(target: &EnvMapGrid, cfg: &SgFitConfig, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    if x.len() != cfg.lobe_count * PARAMS_PER_LOBE {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters for {} lobes",
            x.len(),
            cfg.lobe_count
        )));
    }
    let problem = FitProblem::new(target, cfg);
    let mut g = vec![0.0; x.len()];
    let f = problem.evaluate(x, Some(&mut g));
    Ok((f, g))
}
