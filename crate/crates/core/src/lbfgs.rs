//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The search direction comes from the standard two-loop recursion over the
//! last `history` curvature pairs, with the initial Hessian scaled by
//! `sᵀy / yᵀy`. Steps are chosen by bracketing followed by a safeguarded
//! cubic-interpolation zoom.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub history: usize,
    pub max_iterations: usize,
    /// Stop once `‖∇f‖₂` drops below this.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step lowers `f` by less than this fraction of `max(|f|, 1)`.
    pub relative_decrease_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_evals: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 10,
            max_iterations: 400,
            gradient_tolerance: 1e-6,
            relative_decrease_tolerance: 1e-15,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub loss: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// Progress stalled below `relative_decrease_tolerance`.
    Stalled,
    /// No step satisfying the Wolfe conditions was found; the best point is returned.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub loss: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// One entry for the start point and one per accepted step.
    pub trace: Vec<TracePoint>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Probe {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    /// Directional derivative `∇f · d`.
    slope: f64,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    cfg: &'a LbfgsConfig,
    evals: usize,
    scratch: Vec<f64>,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    /// `None` when the objective is non-finite at the trial point.
    fn probe(&mut self, alpha: f64) -> Result<Option<Probe>> {
        self.evals += 1;
        for ((s, x), d) in self.scratch.iter_mut().zip(self.x).zip(self.dir) {
            *s = x + alpha * d;
        }
        let mut g = vec![0.0; self.x.len()];
        let f = (self.objective)(&self.scratch, &mut g);
        if !f.is_finite() {
            return Ok(None);
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimizer(format!("non-finite gradient at step {alpha}")));
        }
        let slope = dot(&g, self.dir);
        Ok(Some(Probe { alpha, f, g, slope }))
    }

    fn armijo_fails(&self, p: &Probe) -> bool {
        p.f > self.f0 + self.cfg.c1 * p.alpha * self.slope0
    }

    fn curvature_ok(&self, p: &Probe) -> bool {
        p.slope.abs() <= -self.cfg.c2 * self.slope0
    }

    fn search(&mut self, alpha0: f64) -> Result<Option<Probe>> {
        let mut prev = Probe {
            alpha: 0.0,
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = alpha0;
        let mut first = true;
        while self.evals < self.cfg.max_line_search_evals {
            let Some(p) = self.probe(alpha)? else {
                // overflowed: pull back toward the last good point
                alpha = prev.alpha + 0.1 * (alpha - prev.alpha);
                continue;
            };
            if self.armijo_fails(&p) || (!first && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature_ok(&p) {
                return Ok(Some(p));
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            alpha = p.alpha * 2.0;
            prev = p;
            first = false;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Result<Option<Probe>> {
        while self.evals < self.cfg.max_line_search_evals {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= f64::EPSILON * b.max(1e-300) {
                break;
            }
            let mut alpha = cubic_minimizer(&lo, &hi).unwrap_or(0.5 * (a + b));
            let margin = 0.1 * width;
            if !(alpha > a + margin && alpha < b - margin) {
                alpha = 0.5 * (a + b);
            }
            let Some(p) = self.probe(alpha)? else {
                hi = Probe {
                    alpha,
                    f: f64::INFINITY,
                    g: Vec::new(),
                    slope: f64::NAN,
                };
                continue;
            };
            if self.armijo_fails(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature_ok(&p) {
                    return Ok(Some(p));
                }
                if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
        // accept the best sufficient-decrease point found, if any
        if lo.alpha > 0.0 && !lo.g.is_empty() && !self.armijo_fails(&lo) && lo.f < self.f0 {
            return Ok(Some(lo));
        }
        Ok(None)
    }
}

/// Minimizer of the cubic through two points with known slopes.
fn cubic_minimizer(a: &Probe, b: &Probe) -> Option<f64> {
    if !(a.f.is_finite() && b.f.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the function value.
pub fn lbfgs_minimize<F>(mut objective: F, x0: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Optimizer("objective is not finite at the starting point".into()));
    }
    let mut gnorm = norm(&g);
    let mut trace = vec![TracePoint {
        iteration: 0,
        loss: f,
        gradient_norm: gnorm,
    }];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.history);
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    if gnorm < cfg.gradient_tolerance {
        termination = Termination::GradientTolerance;
    } else {
        while iterations < cfg.max_iterations {
            let mut dir = two_loop_direction(&g, &history);
            let mut slope = dot(&g, &dir);
            if !(slope < 0.0) {
                history.clear();
                dir = g.iter().map(|v| -v).collect();
                slope = -gnorm * gnorm;
            }
            let alpha0 = if history.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };

            let mut accepted = None;
            for attempt in 0..2 {
                let mut ls = LineSearch {
                    objective: &mut objective,
                    x: &x,
                    dir: &dir,
                    f0: f,
                    slope0: slope,
                    cfg,
                    evals: 0,
                    scratch: vec![0.0; n],
                };
                accepted = ls.search(alpha0)?;
                if accepted.is_some() || attempt == 1 || history.is_empty() {
                    break;
                }
                // retry once along steepest descent with a fresh memory
                history.clear();
                dir = g.iter().map(|v| -v).collect();
                slope = -gnorm * gnorm;
            }
            let Some(step) = accepted else {
                termination = Termination::LineSearchFailed;
                break;
            };

            let s: Vec<f64> = dir.iter().map(|d| step.alpha * d).collect();
            let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            for (xi, si) in x.iter_mut().zip(&s) {
                *xi += si;
            }
            let decrease = f - step.f;
            f = step.f;
            g = step.g;
            gnorm = norm(&g);
            iterations += 1;
            trace.push(TracePoint {
                iteration: iterations,
                loss: f,
                gradient_norm: gnorm,
            });
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if history.len() == cfg.history {
                    history.pop_front();
                }
                history.push_back((s, y, 1.0 / sy));
            }
            if gnorm < cfg.gradient_tolerance {
                termination = Termination::GradientTolerance;
                break;
            }
            if decrease <= cfg.relative_decrease_tolerance * f.abs().max(1.0) {
                termination = Termination::Stalled;
                break;
            }
        }
    }

    Ok(LbfgsResult {
        x,
        loss: f,
        gradient_norm: gnorm,
        iterations,
        termination,
        trace,
    })
}

fn two_loop_direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}
