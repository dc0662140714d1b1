//! Korn and Poincare checks on discrete fields and strong-form residuals of
//! the full nonlinear boundary value problem.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex64 as C64;

use crate::boundary::BoundaryTemperature;
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, FaceField, ScalarField, VectorField};
use crate::nonlinear::{deviatoric, stress_tensor};
use crate::params::Params;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityRecord {
    fn new(lhs: f64, rhs: f64) -> Self {
        InequalityRecord { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-10) + 1e-300 }
    }
}

/// `|grad u|^2 <= 1/2 |grad u + grad u^T - (2/3) div u I|^2` for tangential `u`.
pub fn verify_korn(u: &VectorField) -> Result<InequalityRecord> {
    if !u.is_tangential() || u.normal_trace_norm() > 1e-12 {
        return Err(Error::Domain("Korn check needs a tangential velocity".into()));
    }
    let grad = u.gradient();
    let lhs: f64 = grad.iter().flatten().map(|f| f.l2_norm().powi(2)).sum();
    let dev = deviatoric(&grad);
    let rhs = 0.5 * dev.iter().flatten().map(|f| f.l2_norm().powi(2)).sum::<f64>();
    Ok(InequalityRecord::new(lhs, rhs))
}

/// `|z|^2 <= |grad z|^2 + |z|^2_{faces}`.
pub fn verify_poincare_trace(z: &ScalarField) -> InequalityRecord {
    let lhs = z.l2_norm().powi(2);
    let grad: f64 = z.gradient().iter().map(|f| f.l2_norm().powi(2)).sum();
    let faces: f64 = (0..2).map(|p| z.trace(p).l2_norm().powi(2)).sum();
    InequalityRecord::new(lhs, grad + faces)
}

/// `|phi| / |grad phi|` for zero-mean `phi`; `None` when the gradient
/// vanishes.
pub fn verify_poincare_zero_mean(phi: &ScalarField) -> Result<Option<f64>> {
    let mean = phi.integrate();
    if mean.abs() > 1e-12 * phi.l2_norm().max(1.0) {
        return Err(Error::Domain(format!("field has mean {mean:.3e}")));
    }
    let grad = phi.gradient().iter().map(|f| f.l2_norm().powi(2)).sum::<f64>().sqrt();
    Ok(if grad > 0.0 { Some(phi.l2_norm() / grad) } else { None })
}

/// Random real field with x1-profiles of degree `deg` (times `x1 (1 - x1)`
/// when `vanish` is set) and all retained Fourier modes.
pub fn random_field(grid: &Arc<ChannelGrid>, deg: usize, vanish: bool, rng: &mut impl Rng) -> ScalarField {
    let nmod = grid.modes();
    let center = nmod / 2;
    let mut coef = vec![C64::new(0.0, 0.0); grid.len()];
    for k in 0..=center {
        let poly: Vec<C64> = (0..=deg)
            .map(|_| {
                let re = rng.gen_range(-1.0..1.0);
                let im = if k == center { 0.0 } else { rng.gen_range(-1.0..1.0) };
                C64::new(re, im)
            })
            .collect();
        for (i, &x) in grid.x1().iter().enumerate() {
            let mut v = poly.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * x + c);
            if vanish {
                v *= x * (1.0 - x);
            }
            coef[i * nmod + k] = v;
            coef[i * nmod + grid.conjugate_index(k)] = v.conj();
        }
    }
    ScalarField::from_coefficients(grid, coef).expect("length")
}

/// Random tangential velocity of x1-degree at most `deg + 2` in `u1`.
pub fn random_tangential(grid: &Arc<ChannelGrid>, deg: usize, rng: &mut impl Rng) -> VectorField {
    let u1 = random_field(grid, deg.saturating_sub(2), true, rng);
    let u2 = random_field(grid, deg, false, rng);
    let u3 = random_field(grid, deg, false, rng);
    VectorField::new([u1, u2, u3]).enforce_tangency()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub samples: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` (or ratio) seen.
    pub worst: f64,
}

/// Korn inequality on `samples` random tangential fields. The x1 degree is
/// kept at most `(N1 - 1) / 2` so that all squared norms are integrated
/// exactly.
pub fn korn_suite(grid: &Arc<ChannelGrid>, samples: usize, rng: &mut impl Rng) -> Result<SuiteResult> {
    let deg = (grid.n1() - 1) / 2;
    let mut res = SuiteResult { samples, violations: 0, worst: 0.0 };
    for _ in 0..samples {
        let rec = verify_korn(&random_tangential(grid, deg, rng))?;
        res.worst = res.worst.max(rec.lhs / rec.rhs);
        if !rec.holds {
            res.violations += 1;
        }
    }
    Ok(res)
}

pub fn poincare_trace_suite(grid: &Arc<ChannelGrid>, samples: usize, rng: &mut impl Rng) -> SuiteResult {
    let deg = (grid.n1() - 1) / 2;
    let mut res = SuiteResult { samples, violations: 0, worst: 0.0 };
    for _ in 0..samples {
        let rec = verify_poincare_trace(&random_field(grid, deg, false, rng));
        res.worst = res.worst.max(rec.lhs / rec.rhs);
        if !rec.holds {
            res.violations += 1;
        }
    }
    res
}

/// Largest `|phi| / |grad phi|` over random zero-mean fields, counted as a
/// violation above `1/pi + 1e-6`.
pub fn poincare_zero_mean_suite(grid: &Arc<ChannelGrid>, samples: usize, rng: &mut impl Rng) -> Result<SuiteResult> {
    let deg = (grid.n1() - 1) / 2;
    let bound = 1.0 / PI + 1e-6;
    let mut res = SuiteResult { samples, violations: 0, worst: 0.0 };
    for _ in 0..samples {
        let phi = random_field(grid, deg, false, rng).project_zero_mean();
        if let Some(r) = verify_poincare_zero_mean(&phi)? {
            res.worst = res.worst.max(r);
            if r > bound {
                res.violations += 1;
            }
        }
    }
    Ok(res)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FaceResidual {
    pub normal: f64,
    pub tangential: [f64; 2],
    pub temperature: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResidualRecord {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub faces: [FaceResidual; 2],
}

impl ResidualRecord {
    pub fn interior_max(&self) -> f64 {
        self.momentum.iter().copied().fold(self.mass.max(self.energy), f64::max)
    }

    pub fn boundary_max(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| [f.normal, f.tangential[0], f.tangential[1], f.temperature])
            .fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.interior_max().max(self.boundary_max())
    }
}

fn face_resample(f: &FaceField, target: &Arc<ChannelGrid>) -> FaceField {
    let src = f.grid();
    let mm = src.m().min(target.m()) as isize;
    let mut coef = vec![C64::new(0.0, 0.0); target.modes()];
    for m2 in -mm..=mm {
        for m3 in -mm..=mm {
            let ks = src.mode_index(m2, m3).unwrap_or(0);
            let kt = target.mode_index(m2, m3).unwrap_or(0);
            coef[kt] = f.coefficients()[ks];
        }
    }
    FaceField::from_coefficients(target, coef)
}

/// Grid on which residuals are evaluated: twice the modes and `2 N1 - 1`
/// nodes, which contains the original nodes.
pub fn residual_grid(grid: &ChannelGrid) -> Result<Arc<ChannelGrid>> {
    ChannelGrid::new(2 * grid.n1() - 1, 2 * grid.m())
}

/// L2 norms of the strong-form residuals of the steady system and of the
/// slip conditions. Fields are first re-expressed on [`residual_grid`], so
/// that products are formed without truncation to the solution's modes.
pub fn pde_residuals(
    rho: &ScalarField,
    u: &VectorField,
    theta: &ScalarField,
    params: &Params,
    wall: &BoundaryTemperature,
) -> Result<ResidualRecord> {
    let fine = residual_grid(rho.grid())?;
    let rho = rho.resample(&fine);
    let u = u.resample(&fine);
    let theta = theta.resample(&fine);
    if !(rho.to_physical().min() > 0.0) {
        return Err(Error::Domain("density must be positive".into()));
    }
    let (r, cv) = (params.r(), params.c_v());
    let stress = stress_tensor(&u, &theta, params)?;
    let kappa = theta.map(|t| params.kappa(t));
    let div = |f: &[ScalarField; 3]| f[0].derivative(1).add(&f[1].derivative(2)).add(&f[2].derivative(3));

    let mom_flux: [ScalarField; 3] = std::array::from_fn(|b| rho.mul(&u.c[b]));
    let mass = div(&mom_flux).l2_norm();

    let p = rho.mul(&theta).scale(r);
    let momentum = std::array::from_fn(|a| {
        let conv: [ScalarField; 3] = std::array::from_fn(|b| mom_flux[a].mul(&u.c[b]).sub(&stress[a][b]));
        div(&conv).add(&p.derivative(a + 1)).l2_norm()
    });

    let speed2 = u.c[0].mul(&u.c[0]).add(&u.c[1].mul(&u.c[1])).add(&u.c[2].mul(&u.c[2]));
    let energy_density = rho.mul(&speed2).scale(0.5).add(&rho.mul(&theta).scale(cv));
    let enthalpy = energy_density.add(&p);
    let gth = theta.gradient();
    let e_flux: [ScalarField; 3] = std::array::from_fn(|b| {
        let work = stress[b][0].mul(&u.c[0]).add(&stress[b][1].mul(&u.c[1])).add(&stress[b][2].mul(&u.c[2]));
        enthalpy.mul(&u.c[b]).sub(&kappa.mul(&gth[b])).sub(&work)
    });
    let energy = div(&e_flux).l2_norm();

    let s2r = (2.0 / r).sqrt();
    let d1u1 = u.c[0].derivative(1);
    let faces = [0, 1].map(|f| {
        let nrm = if f == 0 { -1.0 } else { 1.0 };
        let tw = face_resample(&wall.faces[f], &fine);
        let mu_w = tw.map(|t| params.mu(t));
        let kappa_w = tw.map(|t| params.kappa(t));
        let rho_f = rho.trace(f);
        let th_f = theta.trace(f);
        let visc = mu_w.mul(&tw.map(|t| 1.0 / t.sqrt())).scale(s2r * params.a_u1() * nrm);
        let creep = kappa_w.mul(&tw.map(|t| 1.0 / t)).scale(4.0 / (5.0 * r) * params.a_t1());
        let tangential = [2, 3].map(|j| {
            let shear = u.c[0].derivative(j).add(&u.c[j - 1].derivative(1)).trace(f);
            rho_f
                .mul(&u.c[j - 1].trace(f))
                .axpy(1.0, &visc.mul(&shear))
                .axpy(-1.0, &creep.mul(&theta.derivative(j).trace(f)))
                .l2_norm()
        });
        let cond = kappa_w.mul(&tw.map(|t| 1.0 / t.sqrt())).scale(2.0 / (5.0 * r) * s2r * params.a_t2() * nrm);
        let temperature = rho_f
            .mul(&th_f.axpy(-1.0, &tw))
            .axpy(-params.a_u2() / r, &mu_w.mul(&d1u1.trace(f)))
            .axpy(1.0, &cond.mul(&theta.derivative(1).trace(f)))
            .l2_norm();
        FaceResidual { normal: u.c[0].trace(f).l2_norm(), tangential, temperature }
    });
    Ok(ResidualRecord { mass, momentum, energy, faces })
}
