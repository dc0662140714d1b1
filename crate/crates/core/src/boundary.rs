//! Wall temperature on the two faces and its extension into the channel.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::Complex64;
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, FaceField, ScalarField};

/// Sobolev order used to measure the size of the wall perturbation.
pub const BOUNDARY_ORDER: usize = 4;

/// One trigonometric term of the wall perturbation: `cos(2 pi m x_axis)` for
/// `m >= 0` and `sin(2 pi |m| x_axis)` for `m < 0`, on face `face`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallMode {
    pub axis: usize,
    pub m: i64,
    pub amplitude: f64,
    pub face: usize,
}

impl WallMode {
    /// Pointwise value of the mode at `(x2, x3)` (without `epsilon`).
    pub fn eval(&self, x2: f64, x3: f64) -> f64 {
        let x = if self.axis == 2 { x2 } else { x3 };
        let arg = 2.0 * PI * self.m.unsigned_abs() as f64 * x;
        self.amplitude * if self.m >= 0 { arg.cos() } else { arg.sin() }
    }
}

/// `theta_w = theta_bar + epsilon * sum(modes)` on each face.
#[derive(Clone, Debug, PartialEq)]
pub struct WallRecipe {
    pub theta_bar: f64,
    pub epsilon: f64,
    pub modes: Vec<WallMode>,
}

#[derive(Clone, Debug)]
pub struct BoundaryTemperature {
    pub faces: [FaceField; 2],
    pub theta_bar: f64,
}

#[derive(Clone, Debug)]
pub struct ExtendedTemperature {
    pub tilde: ScalarField,
    /// `H^4` size of `theta_w - theta_bar`, root-sum-square over faces.
    pub delta: f64,
}

/// Smallest and largest value of a face field, sampled on a grid fine
/// enough to resolve the extrema of low modes exactly.
pub fn face_extrema(f: &FaceField) -> (f64, f64) {
    let g = f.grid();
    let (nm, m) = (g.nm(), g.m() as f64);
    let q = 4 * g.padded();
    let phase = |k: usize, t: usize| {
        let a = 2.0 * PI * (k as f64 - m) * t as f64 / q as f64;
        Complex64::new(a.cos(), a.sin())
    };
    let c = f.coefficients();
    // Partial sums over m3 for every sample x3, then over m2.
    let mut partial = vec![Complex64::new(0.0, 0.0); nm * q];
    for a in 0..nm {
        for t in 0..q {
            partial[a * q + t] = (0..nm).map(|b| c[a * nm + b] * phase(b, t)).sum();
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s2 in 0..q {
        let e2: Vec<Complex64> = (0..nm).map(|a| phase(a, s2)).collect();
        for t in 0..q {
            let v: f64 = (0..nm).map(|a| (e2[a] * partial[a * q + t]).re).sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

pub fn make_wall_temperature(recipe: &WallRecipe, grid: &Arc<ChannelGrid>) -> Result<BoundaryTemperature> {
    for md in &recipe.modes {
        if md.axis != 2 && md.axis != 3 {
            return Err(Error::InvalidParams(format!("wall mode axis must be 2 or 3, got {}", md.axis)));
        }
        if md.face > 1 {
            return Err(Error::InvalidParams(format!("wall mode face must be 0 or 1, got {}", md.face)));
        }
        if md.m.unsigned_abs() as usize > grid.m() {
            return Err(Error::InvalidParams(format!(
                "wall mode {} is outside the Fourier truncation M = {}",
                md.m,
                grid.m()
            )));
        }
    }
    if !(recipe.theta_bar > 0.0) {
        return Err(Error::Domain(format!("theta_bar must be positive, got {}", recipe.theta_bar)));
    }
    // Coefficients are set directly so that a constant wall is exactly
    // constant.
    let faces = [0, 1].map(|p| {
        let mut coef = vec![Complex64::new(0.0, 0.0); grid.modes()];
        coef[grid.mode_index(0, 0).expect("zero mode")] = Complex64::new(recipe.theta_bar, 0.0);
        for md in recipe.modes.iter().filter(|md| md.face == p) {
            let k = md.m.unsigned_abs() as isize;
            let a = recipe.epsilon * md.amplitude;
            let at = |m: isize| if md.axis == 2 { grid.mode_index(m, 0) } else { grid.mode_index(0, m) };
            let (plus, minus) = (at(k).expect("mode in range"), at(-k).expect("mode in range"));
            if k == 0 {
                if md.m >= 0 {
                    coef[plus] += a;
                }
            } else if md.m > 0 {
                coef[plus] += 0.5 * a;
                coef[minus] += 0.5 * a;
            } else {
                coef[plus] += Complex64::new(0.0, -0.5 * a);
                coef[minus] += Complex64::new(0.0, 0.5 * a);
            }
        }
        FaceField::from_coefficients(grid, coef)
    });
    for (p, f) in faces.iter().enumerate() {
        let (lo, _) = face_extrema(f);
        if !(lo > 1e-12) {
            return Err(Error::Domain(format!("wall temperature on face {p} is not positive (min {lo:.3e})")));
        }
    }
    Ok(BoundaryTemperature { faces, theta_bar: recipe.theta_bar })
}

/// Cubic smoothstep `3 s^2 - 2 s^3`.
pub fn blend(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

pub fn extend_wall_temperature(bt: &BoundaryTemperature, grid: &Arc<ChannelGrid>) -> ExtendedTemperature {
    let nmod = grid.modes();
    let (c0, c1) = (bt.faces[0].coefficients(), bt.faces[1].coefficients());
    let mut coef = Vec::with_capacity(grid.len());
    for &x in grid.x1() {
        let b = blend(x);
        coef.extend((0..nmod).map(|k| c0[k] + (c1[k] - c0[k]) * b));
    }
    let tilde = ScalarField::from_coefficients(grid, coef).expect("length matches grid");
    let delta = bt
        .faces
        .iter()
        .map(|f| {
            let mut d = f.clone();
            d.add_constant(-bt.theta_bar);
            d.sobolev_norm(BOUNDARY_ORDER).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    ExtendedTemperature { tilde, delta }
}
