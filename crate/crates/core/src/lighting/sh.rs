//! Real spherical harmonics without the Condon–Shortley phase.
//!
//! Coefficient `(l, m)` lives at index `l (l + 1) + m`. For `m > 0` the basis
//! is `√2 K P_l^m(cos θ) cos(mφ)`, for `m < 0` it is
//! `√2 K P_l^|m|(cos θ) sin(|m|φ)`, and `K P_l^0` for `m = 0`, where
//! `K = sqrt((2l+1)/(4π) · (l-|m|)!/(l+|m|)!)`. With this convention
//! `Y_1^1 ∝ +x` and `Y_1^-1 ∝ +y`.

use std::f64::consts::{PI, SQRT_2};

use super::{EnvMapGrid, Radiance};
use crate::math::{Rgb, Vec3};

pub const DEFAULT_SH_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ShCoeffs {
    order: usize,
    coeffs: Vec<Rgb>,
}

impl ShCoeffs {
    pub fn new(order: usize, coeffs: Vec<Rgb>) -> Self {
        assert_eq!(coeffs.len(), (order + 1) * (order + 1), "coefficient count");
        ShCoeffs { order, coeffs }
    }

    pub fn zeros(order: usize) -> Self {
        ShCoeffs::new(order, vec![[0.0; 3]; (order + 1) * (order + 1)])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[Rgb] {
        &self.coeffs
    }

    pub fn get(&self, l: usize, m: i64) -> Rgb {
        self.coeffs[index(l, m)]
    }

    /// Number of scalar parameters (three per basis function).
    pub fn parameter_count(&self) -> usize {
        self.coeffs.len() * 3
    }
}

pub(crate) fn index(l: usize, m: i64) -> usize {
    assert!(m.unsigned_abs() as usize <= l);
    (l as i64 * (l as i64 + 1) + m) as usize
}

fn factorial_ratio(l: usize, m: usize) -> f64 {
    // (l - m)! / (l + m)!
    ((l - m + 1)..=(l + m)).fold(1.0, |acc, k| acc / k as f64)
}

/// Fills `out` (length `(order+1)²`) with every basis function at `dir`.
pub fn sh_basis(order: usize, dir: Vec3, out: &mut [f64]) {
    assert_eq!(out.len(), (order + 1) * (order + 1));
    let x = dir.z.clamp(-1.0, 1.0);
    let s = (1.0 - x * x).max(0.0).sqrt();
    let phi = dir.y.atan2(dir.x);

    // associated Legendre table p[l][m], no (-1)^m phase
    let mut p = vec![vec![0.0; order + 1]; order + 1];
    let mut pmm = 1.0;
    for m in 0..=order {
        if m > 0 {
            pmm *= (2 * m - 1) as f64 * s;
        }
        p[m][m] = pmm;
        if m < order {
            p[m + 1][m] = x * (2 * m + 1) as f64 * pmm;
        }
        for l in (m + 2)..=order {
            p[l][m] = ((2 * l - 1) as f64 * x * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m]) / (l - m) as f64;
        }
    }

    for l in 0..=order {
        for m in 0..=l {
            let k = ((2 * l + 1) as f64 / (4.0 * PI) * factorial_ratio(l, m)).sqrt();
            if m == 0 {
                out[index(l, 0)] = k * p[l][0];
            } else {
                let (sm, cm) = (m as f64 * phi).sin_cos();
                out[index(l, m as i64)] = SQRT_2 * k * p[l][m] * cm;
                out[index(l, -(m as i64))] = SQRT_2 * k * p[l][m] * sm;
            }
        }
    }
}

/// `c_lm = Σ_cells L(dir) Y_lm(dir) dω`.
pub fn sh_project(grid: &EnvMapGrid, order: usize) -> ShCoeffs {
    let n = (order + 1) * (order + 1);
    let mut coeffs = vec![[0.0; 3]; n];
    let mut basis = vec![0.0; n];
    for r in 0..grid.rows() {
        let d_omega = grid.solid_angle(r);
        for c in 0..grid.cols() {
            sh_basis(order, grid.direction(r, c), &mut basis);
            let l = grid.at(r, c);
            for (coef, y) in coeffs.iter_mut().zip(&basis) {
                for k in 0..3 {
                    coef[k] += l[k] * y * d_omega;
                }
            }
        }
    }
    ShCoeffs::new(order, coeffs)
}

/// `Σ c_lm Y_lm(dir)`; may be negative.
pub fn sh_eval(coeffs: &ShCoeffs, dir: Vec3) -> Rgb {
    let mut basis = vec![0.0; coeffs.coeffs.len()];
    sh_basis(coeffs.order, dir, &mut basis);
    let mut acc = [0.0; 3];
    for (coef, y) in coeffs.coeffs.iter().zip(&basis) {
        for k in 0..3 {
            acc[k] += coef[k] * y;
        }
    }
    acc
}

impl Radiance for ShCoeffs {
    fn radiance(&self, dir: Vec3) -> Rgb {
        sh_eval(self, dir)
    }
}
