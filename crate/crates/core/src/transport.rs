//! Density update `phi + h div(phi u) = H` through the regularized problem
//! `-(1/k) lap phi + phi + h div(phi u) = H`, `d_n phi = 0` on both faces.
//!
//! The discrete problem is Galerkin with Clenshaw-Curtis quadrature (mass
//! lumped), so the Neumann condition is natural.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rustfft::num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, PhysField, ScalarField, VectorField};
use crate::krylov::{self, GmresOptions};
use crate::par;

const TWO_PI: f64 = 2.0 * PI;

/// Rough spectral radius of the discrete Laplacian on the grid; regularization
/// parameters are quoted as multiples of it.
pub fn laplacian_scale(grid: &ChannelGrid) -> f64 {
    let n = (grid.n1() - 1) as f64;
    2.0 * (TWO_PI * grid.m() as f64).powi(2) + 0.2 * n.powi(4)
}

/// Regularized transport operator for one value of `k`.
pub struct TransportSolver {
    grid: Arc<ChannelGrid>,
    k_reg: f64,
    blocks: BTreeMap<i64, LU<f64, Dyn, Dyn>>,
}

impl TransportSolver {
    pub fn new(grid: &Arc<ChannelGrid>, k_reg: f64) -> Result<Self> {
        if !(k_reg > 0.0) {
            return Err(Error::InvalidParams(format!("k_reg must be positive, got {k_reg}")));
        }
        let n1 = grid.n1();
        let (w, d) = (grid.weights(), grid.diff1());
        let mut stiff = DMatrix::<f64>::zeros(n1, n1);
        for i in 0..n1 {
            for j in 0..n1 {
                stiff[(i, j)] = (0..n1).map(|l| d[l * n1 + i] * w[l] * d[l * n1 + j]).sum();
            }
        }
        let mut keys: Vec<i64> = (0..grid.modes())
            .map(|k| {
                let (a, b) = grid.wavenumbers(k);
                (a * a + b * b) as i64
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let lus = par::map_collect(keys.len(), |idx| {
            let lam = TWO_PI * TWO_PI * keys[idx] as f64;
            let mut a = stiff.scale(1.0 / k_reg);
            for i in 0..n1 {
                a[(i, i)] += w[i] * (1.0 + lam / k_reg);
            }
            a.lu()
        });
        Ok(TransportSolver { grid: grid.clone(), k_reg, blocks: keys.into_iter().zip(lus).collect() })
    }

    pub fn k_reg(&self) -> f64 {
        self.k_reg
    }

    fn apply(&self, u: &[PhysField; 3], h: f64, x: &[C64]) -> Vec<C64> {
        let g = &self.grid;
        let (n1, nmod) = (g.n1(), g.modes());
        let phi = ScalarField::from_coefficients(g, x.to_vec()).expect("length");
        let pp = phi.to_physical();
        let mut div = ScalarField::zeros(g);
        for (b, ub) in u.iter().enumerate() {
            div = div.add(&pp.zip(ub, |a, c| a * c).to_spectral().derivative(b + 1));
        }
        let s = phi.axpy(h, &div);
        let dphi = phi.derivative(1);
        let (w, d) = (g.weights(), g.diff1());
        let inv_k = 1.0 / self.k_reg;
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        par::for_each_chunk(&mut out, nmod, |i, row| {
            for (k, r) in row.iter_mut().enumerate() {
                let (m2, m3) = g.wavenumbers(k);
                let lam = TWO_PI * TWO_PI * (m2 * m2 + m3 * m3) as f64;
                *r = s.at(i, k) * w[i] + phi.at(i, k) * (inv_k * lam * w[i]);
            }
            for j in 0..n1 {
                let c = d[j * n1 + i] * w[j] * inv_k;
                if c != 0.0 {
                    for (k, r) in row.iter_mut().enumerate() {
                        *r += dphi.at(j, k) * c;
                    }
                }
            }
        });
        out
    }

    fn precondition(&self, x: &[C64]) -> Vec<C64> {
        let g = &self.grid;
        let (n1, nmod) = (g.n1(), g.modes());
        let cols = par::map_collect(nmod, |k| {
            let (m2, m3) = g.wavenumbers(k);
            let lu = &self.blocks[&((m2 * m2 + m3 * m3) as i64)];
            let re = DVector::from_iterator(n1, (0..n1).map(|i| x[i * nmod + k].re));
            let im = DVector::from_iterator(n1, (0..n1).map(|i| x[i * nmod + k].im));
            let (sr, si) = (lu.solve(&re).unwrap_or(re), lu.solve(&im).unwrap_or(im));
            (0..n1).map(|i| C64::new(sr[i], si[i])).collect::<Vec<_>>()
        });
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for (k, c) in cols.into_iter().enumerate() {
            for (i, v) in c.into_iter().enumerate() {
                out[i * nmod + k] = v;
            }
        }
        out
    }

    /// Solves with relative residual `tol` and returns the zero-mean part.
    pub fn solve(
        &self,
        u: &VectorField,
        hfield: &ScalarField,
        h: f64,
        tol: f64,
        warm: Option<&ScalarField>,
    ) -> Result<ScalarField> {
        let g = &self.grid;
        let div = u.divergence().to_physical();
        let lo = div.min();
        if !(1.0 + h * lo > 0.0) {
            return Err(Error::Domain(format!(
                "1 + h div u = {:.3e} is not positive; reduce h",
                1.0 + h * lo
            )));
        }
        let up = [0, 1, 2].map(|b| u.c[b].to_physical());
        let w = g.weights();
        let nmod = g.modes();
        let rhs: Vec<C64> = hfield.coefficients().iter().enumerate().map(|(idx, c)| c * w[idx / nmod]).collect();
        let x0 = warm.map_or_else(|| vec![C64::new(0.0, 0.0); rhs.len()], |p| p.coefficients().to_vec());
        let opts = GmresOptions { tol, restart: 40, max_iter: 400 };
        let out = krylov::gmres(|x| self.apply(&up, h, x), |x| self.precondition(x), &rhs, x0, &opts);
        if !out.converged {
            return Err(Error::Stagnation {
                what: "transport solve",
                iterations: out.iterations,
                residual: out.residual,
                history: out.history,
            });
        }
        Ok(ScalarField::from_coefficients(g, out.x)?.project_zero_mean())
    }
}

pub fn solve_transport(u: &VectorField, hfield: &ScalarField, h: f64, k_reg: f64, tol: f64) -> Result<ScalarField> {
    TransportSolver::new(u.grid(), k_reg)?.solve(u, hfield, h, tol, None)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KRefinementReport {
    pub k_values: Vec<f64>,
    /// `|phi_{k_{i+1}} - phi_{k_i}|_{H1}`.
    pub differences: Vec<f64>,
    pub monotone: bool,
}

pub fn k_refinement(
    u: &VectorField,
    hfield: &ScalarField,
    h: f64,
    k_sequence: &[f64],
    tol: f64,
) -> Result<(ScalarField, KRefinementReport)> {
    if k_sequence.is_empty() || k_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("k sequence must be nonempty and increasing".into()));
    }
    let mut prev: Option<ScalarField> = None;
    let mut report = KRefinementReport { k_values: k_sequence.to_vec(), ..Default::default() };
    for &k in k_sequence {
        let phi = TransportSolver::new(u.grid(), k)?.solve(u, hfield, h, tol, prev.as_ref())?;
        if let Some(p) = &prev {
            report.differences.push(phi.sub(p).sobolev_norm(1));
        }
        prev = Some(phi);
    }
    report.monotone = report.differences.windows(2).all(|w| w[1] < w[0]);
    Ok((prev.expect("nonempty sequence"), report))
}
