//! The variational problem for `(u, zeta)` at frozen `(phi', u', zeta')`.
//!
//! Test functions are `(w_u / mu_bar) v` in the momentum equation,
//! `(w_z / kappa_bar) xi` in the heat equation and `(c_n / mu_bar) n xi e_1`
//! again in the momentum equation, with the slip conditions substituted into
//! the boundary terms. With `th` the extended wall temperature,
//!
//! ```text
//! w_u = (2/3R) sqrt(2/R) a_u1 a_u2 mu(th)^2 / sqrt(th)
//! w_z = (32/75R^2) sqrt(2/R) a_t1 a_t2 kappa(th)^2 / th^(3/2)
//! c_n = -(4/5R^2) a_u2 a_t1 mu(th) kappa(th) / th
//! n   = 2 x1 - 1
//! ```
//!
//! The form is applied matrix-free: gradients of the trial pair are taken
//! spectrally, multiplied by the coefficients on the padded grid, and the
//! resulting fluxes are tested against the nodal x Fourier basis using the
//! Clenshaw-Curtis quadrature. Trial and test velocities have `u1 = 0` at
//! both faces; those rows of the discrete system are identity rows.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64 as C64;

use crate::boundary::{BoundaryTemperature, ExtendedTemperature};
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, FaceField, ScalarField, VectorField};
use crate::krylov::{self, GmresOptions};
use crate::nonlinear::{compute_f, compute_g, State};
use crate::par;
use crate::params::{check_assumption, LambdaGrid, Params};

const TWO_PI: f64 = 2.0 * PI;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Temperature-dependent coefficients of the form.
#[derive(Clone, Debug)]
pub struct FormCoefficients {
    s: f64,
    mu0: f64,
    kappa0: f64,
    c_wu: f64,
    c_wz: f64,
    c_n: f64,
    c_gu: f64,
    c_gt: f64,
    c_p: f64,
    r: f64,
    rho_bar: f64,
    mu_bar: f64,
    kappa_bar: f64,
    /// Coefficient of `div u` in the linearized heat equation.
    k_conv: f64,
    cal_r: f64,
}

impl FormCoefficients {
    /// `include_cal_r = false` drops the coupling constant from the heat
    /// equation (used to measure the residual of the unmodified system).
    pub fn new(p: &Params, include_cal_r: bool) -> Self {
        let r = p.r();
        let s2r = (2.0 / r).sqrt();
        let cal_r = if include_cal_r { p.cal_r() } else { 0.0 };
        FormCoefficients {
            s: p.law_exponent(),
            mu0: p.spec().mu0,
            kappa0: p.spec().kappa0,
            c_wu: 2.0 / (3.0 * r) * s2r * p.a_u1() * p.a_u2(),
            c_wz: 32.0 / (75.0 * r * r) * s2r * p.a_t1() * p.a_t2(),
            c_n: -4.0 / (5.0 * r * r) * p.a_u2() * p.a_t1(),
            c_gu: 2.0 / (3.0 * r) * p.a_u2(),
            c_gt: 16.0 / (15.0 * r) * p.a_t1(),
            c_p: 8.0 / (15.0 * r * r) * p.a_u2() * p.a_t1(),
            r,
            rho_bar: p.rho_bar(),
            mu_bar: p.mu_bar(),
            kappa_bar: p.kappa_bar(),
            k_conv: r * p.rho_bar() * p.theta_bar() + cal_r * p.rho_bar(),
            cal_r,
        }
    }

    fn mu(&self, t: f64) -> f64 {
        self.mu0 * t.powf(self.s)
    }
    fn kappa(&self, t: f64) -> f64 {
        self.kappa0 * t.powf(self.s)
    }
    pub fn wu(&self, t: f64) -> f64 {
        self.c_wu * self.mu(t).powi(2) / t.sqrt()
    }
    pub fn wz(&self, t: f64) -> f64 {
        self.c_wz * self.kappa(t).powi(2) / (t * t.sqrt())
    }
    pub fn cn(&self, t: f64) -> f64 {
        self.c_n * self.mu(t) * self.kappa(t) / t
    }
    fn d_wu(&self, t: f64) -> f64 {
        (2.0 * self.s - 0.5) * self.wu(t) / t
    }
    fn d_wz(&self, t: f64) -> f64 {
        (2.0 * self.s - 1.5) * self.wz(t) / t
    }
    fn d_cn(&self, t: f64) -> f64 {
        (2.0 * self.s - 1.0) * self.cn(t) / t
    }
    /// Velocity slip weight `(2/3R) a_u2 mu(theta_w)`.
    pub fn gamma_u(&self, t: f64) -> f64 {
        self.c_gu * self.mu(t)
    }
    /// Temperature jump weight `(16/15R) a_t1 kappa(theta_w) / theta_w`.
    pub fn gamma_t(&self, t: f64) -> f64 {
        self.c_gt * self.kappa(t) / t
    }
    /// Cross weight `(8/15R^2) a_u2 a_t1 mu kappa / theta_w`.
    pub fn pair(&self, t: f64) -> f64 {
        self.c_p * self.mu(t) * self.kappa(t) / t
    }
    fn d_pair(&self, t: f64) -> f64 {
        (2.0 * self.s - 1.0) * self.pair(t) / t
    }
    /// Prefactor of the bare boundary pairing.
    pub fn pairing_prefactor(&self) -> f64 {
        self.c_p
    }

    fn point(&self, t: f64, grad: [f64; 3], nw: f64) -> PointCoeffs {
        let (wu, wz, cn) = (self.wu(t), self.wz(t), self.cn(t));
        let (dwu, dwz, dcn) = (self.d_wu(t), self.d_wz(t), self.d_cn(t));
        PointCoeffs {
            wu,
            wz,
            cn,
            gwu: grad.map(|g| dwu * g),
            gwz: grad.map(|g| dwz * g),
            gcn: grad.map(|g| dcn * g),
            nw,
            conv_u: self.r * self.rho_bar * wu / self.mu_bar,
            conv_z: self.k_conv * wz / self.kappa_bar,
            conv_n: self.r * self.rho_bar * cn / self.mu_bar,
        }
    }

    fn face_point(&self, t: f64, grad_t: [f64; 2], density: f64) -> FacePointCoeffs {
        let dp = self.d_pair(t);
        FacePointCoeffs {
            slip_u: self.gamma_u(t) * density,
            slip_z: self.gamma_t(t) * density,
            pair: self.pair(t),
            gpair: grad_t.map(|g| dp * g),
        }
    }
}

/// Interior coefficients at one quadrature point.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PointCoeffs {
    wu: f64,
    wz: f64,
    cn: f64,
    gwu: [f64; 3],
    gwz: [f64; 3],
    gcn: [f64; 3],
    nw: f64,
    conv_u: f64,
    conv_z: f64,
    conv_n: f64,
}

/// Face coefficients at one point of a wall.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct FacePointCoeffs {
    slip_u: f64,
    slip_z: f64,
    pair: f64,
    gpair: [f64; 2],
}

pub(crate) trait Num: Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl Num for f64 {}
impl Num for C64 {}

/// Number of interior flux components: `grad v` (9), `v` (3), `grad xi` (3), `xi`.
const NFLUX: usize = 16;
const F_V: usize = 9;
const F_GXI: usize = 12;
const F_XI: usize = 15;

/// Coefficients of every test-function component at one point, given the
/// trial gradients `g[a][b] = d_b u_a` and `gz = grad zeta`.
#[inline]
pub(crate) fn interior_flux<T: Num>(c: &PointCoeffs, g: &[[T; 3]; 3], gz: &[T; 3]) -> [T; NFLUX] {
    let div = g[0][0] + g[1][1] + g[2][2];
    let d: [[T; 3]; 3] = std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let s = g[a][b] + g[b][a];
            if a == b {
                s - div * (2.0 / 3.0)
            } else {
                s
            }
        })
    });
    let mut out = [T::default(); NFLUX];
    for a in 0..3 {
        for b in 0..3 {
            out[3 * a + b] = d[a][b] * c.wu;
        }
    }
    for b in 0..3 {
        out[F_V + b] = d[0][b] * c.gwu[0] + d[1][b] * c.gwu[1] + d[2][b] * c.gwu[2] + gz[b] * c.conv_u;
        out[F_GXI + b] = gz[b] * c.wz + d[0][b] * (c.cn * c.nw);
    }
    let mut xi = div * c.conv_z + gz[0] * (c.conv_n * c.nw) + d[0][0] * (2.0 * c.cn);
    for b in 0..3 {
        xi = xi + gz[b] * c.gwz[b] + d[0][b] * (c.nw * c.gcn[b]);
    }
    out[F_XI] = xi;
    out
}

/// Face flux components: tangential velocity tests (2), `xi`, tangential
/// derivatives of `xi` (2).
#[inline]
pub(crate) fn face_flux<T: Num>(c: &FacePointCoeffs, ut: [T; 2], z: T, gzt: [T; 2]) -> [T; 5] {
    [
        ut[0] * c.slip_u - gzt[0] * c.pair,
        ut[1] * c.slip_u - gzt[1] * c.pair,
        z * c.slip_z + ut[0] * c.gpair[0] + ut[1] * c.gpair[1],
        ut[0] * c.pair,
        ut[1] * c.pair,
    ]
}

/// Packs a trial pair into the unknown vector `[u1 | u2 | u3 | zeta]`.
pub fn pack(u: &VectorField, zeta: &ScalarField) -> Vec<C64> {
    let mut x = Vec::with_capacity(4 * zeta.grid().len());
    for c in &u.c {
        x.extend_from_slice(c.coefficients());
    }
    x.extend_from_slice(zeta.coefficients());
    x
}

pub fn unpack(grid: &Arc<ChannelGrid>, x: &[C64]) -> (VectorField, ScalarField) {
    let n = grid.len();
    let f = |i: usize| ScalarField::from_coefficients(grid, x[i * n..(i + 1) * n].to_vec()).expect("length");
    (VectorField::new([f(0), f(1), f(2)]), f(3))
}

/// Tests interior fluxes (given at the quadrature nodes) and face fluxes
/// against the basis.
fn assemble_residual(
    grid: &ChannelGrid,
    flux: &[Vec<C64>],
    face: &[[Vec<C64>; 5]; 2],
    out: &mut [C64],
) {
    let (n1, nmod, len) = (grid.n1(), grid.modes(), grid.len());
    let nq = grid.quad_len();
    for c in 0..4 {
        let (vol, g1, g2, g3) = if c < 3 {
            (&flux[F_V + c], &flux[3 * c], &flux[3 * c + 1], &flux[3 * c + 2])
        } else {
            (&flux[F_XI], &flux[F_GXI], &flux[F_GXI + 1], &flux[F_GXI + 2])
        };
        let mut a = vec![ZERO; nq * nmod];
        par::for_each_chunk(&mut a, nmod, |q, row| {
            for (k, r) in row.iter_mut().enumerate() {
                let (m2, m3) = grid.wavenumbers(k);
                let idx = q * nmod + k;
                *r = vol[idx]
                    + C64::new(0.0, -TWO_PI * m2 as f64) * g2[idx]
                    + C64::new(0.0, -TWO_PI * m3 as f64) * g3[idx];
            }
        });
        let dst = &mut out[c * len..(c + 1) * len];
        grid.test_quad(&a, false, dst);
        grid.test_quad(g1, true, dst);
        if c == 0 {
            continue;
        }
        for (f, ff) in face.iter().enumerate() {
            let i = grid.face_node(f);
            for (k, r) in dst[i * nmod..(i + 1) * nmod].iter_mut().enumerate() {
                let (m2, m3) = grid.wavenumbers(k);
                *r += match c {
                    1 => ff[0][k],
                    2 => ff[1][k],
                    _ => {
                        ff[2][k]
                            + C64::new(0.0, -TWO_PI * m2 as f64) * ff[3][k]
                            + C64::new(0.0, -TWO_PI * m3 as f64) * ff[4][k]
                    }
                };
            }
        }
    }
    let _ = n1;
}

/// Replaces the `u1` rows at both faces by identity rows.
fn constrain(grid: &ChannelGrid, x: &[C64], out: &mut [C64]) {
    let nmod = grid.modes();
    for f in 0..2 {
        let s = grid.face_node(f) * nmod;
        out[s..s + nmod].copy_from_slice(&x[s..s + nmod]);
    }
}

/// Constant-coefficient form restricted to one Fourier mode (coefficients
/// frozen at `theta_bar`, face density `rho_bar`). Local layout `[c][i]`.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    grid: Arc<ChannelGrid>,
    nodes: Vec<PointCoeffs>,
    face: FacePointCoeffs,
}

impl ModeOperator {
    pub fn constant(grid: &Arc<ChannelGrid>, fc: &FormCoefficients, theta: f64, density: f64) -> Self {
        let nodes = grid.quad_x1().iter().map(|&x| fc.point(theta, [0.0; 3], 2.0 * x - 1.0)).collect();
        ModeOperator { grid: grid.clone(), nodes, face: fc.face_point(theta, [0.0; 2], density) }
    }

    pub fn size(&self) -> usize {
        4 * self.grid.n1()
    }

    /// Applies the form for mode index `k`; with `constrained` the `u1`
    /// face rows become identity rows.
    pub fn apply(&self, k: usize, x: &[C64], constrained: bool) -> Vec<C64> {
        let g = &self.grid;
        let (n1, nq) = (g.n1(), g.quad_len());
        let (m2, m3) = g.wavenumbers(k);
        let (i2, i3) = (C64::new(0.0, TWO_PI * m2 as f64), C64::new(0.0, TWO_PI * m3 as f64));
        let (e, ed, w) = (g.quad_basis(false), g.quad_basis(true), g.quad_weights());
        let at = |b: &[f64], c: usize, q: usize| -> C64 { (0..n1).map(|j| x[c * n1 + j] * b[q * n1 + j]).sum() };
        let mut flux = vec![[ZERO; NFLUX]; nq];
        for (q, fl) in flux.iter_mut().enumerate() {
            let val: [C64; 4] = std::array::from_fn(|c| at(e, c, q));
            let grad: [[C64; 3]; 3] = std::array::from_fn(|a| [at(ed, a, q), i2 * val[a], i3 * val[a]]);
            let gz = [at(ed, 3, q), i2 * val[3], i3 * val[3]];
            *fl = interior_flux(&self.nodes[q], &grad, &gz);
        }
        let mut out = vec![ZERO; 4 * n1];
        for c in 0..4 {
            let (vol, g1, g2, g3) = if c < 3 { (F_V + c, 3 * c, 3 * c + 1, 3 * c + 2) } else { (F_XI, F_GXI, F_GXI + 1, F_GXI + 2) };
            for i in 0..n1 {
                let mut r = ZERO;
                for q in 0..nq {
                    let a = flux[q][vol] - i2 * flux[q][g2] - i3 * flux[q][g3];
                    r += (a * e[q * n1 + i] + flux[q][g1] * ed[q * n1 + i]) * w[q];
                }
                out[c * n1 + i] = r;
            }
        }
        for f in 0..2 {
            let i = g.face_node(f);
            let z = x[3 * n1 + i];
            let ff = face_flux(&self.face, [x[n1 + i], x[2 * n1 + i]], z, [i2 * z, i3 * z]);
            out[n1 + i] += ff[0];
            out[2 * n1 + i] += ff[1];
            out[3 * n1 + i] += ff[2] - i2 * ff[3] - i3 * ff[4];
            if constrained {
                out[i] = x[i];
            }
        }
        out
    }

    /// Dense matrix of the constrained mode operator.
    pub fn matrix(&self, k: usize) -> DMatrix<C64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        for col in 0..n {
            e[col] = C64::new(1.0, 0.0);
            let y = self.apply(k, &e, true);
            for (row, v) in y.into_iter().enumerate() {
                m[(row, col)] = v;
            }
            e[col] = ZERO;
        }
        m
    }
}

/// Exact inverse of the constant-coefficient operator, one LU per mode pair
/// `(m, -m)`.
pub struct BlockPreconditioner {
    grid: Arc<ChannelGrid>,
    lus: Vec<LU<C64, Dyn, Dyn>>,
}

impl BlockPreconditioner {
    pub fn new(op: &ModeOperator) -> Result<Self> {
        let grid = op.grid.clone();
        let half = grid.modes() / 2 + 1;
        let lus = par::map_collect(half, |k| op.matrix(k).lu());
        for (k, lu) in lus.iter().enumerate() {
            if !lu.is_invertible() {
                let (m2, m3) = grid.wavenumbers(k);
                return Err(Error::Domain(format!("mode ({m2},{m3}) block is singular")));
            }
        }
        Ok(BlockPreconditioner { grid, lus })
    }

    fn solve_mode(&self, k: usize, b: &[C64]) -> Vec<C64> {
        let half = self.lus.len();
        let (idx, conj) = if k < half { (k, false) } else { (self.grid.conjugate_index(k), true) };
        let rhs = DVector::from_iterator(b.len(), b.iter().map(|v| if conj { v.conj() } else { *v }));
        let sol = self.lus[idx].solve(&rhs).unwrap_or(rhs);
        sol.iter().map(|v| if conj { v.conj() } else { *v }).collect()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let g = &self.grid;
        let (n1, nmod, len) = (g.n1(), g.modes(), g.len());
        let local = par::map_collect(nmod, |k| {
            let b: Vec<C64> = (0..4 * n1).map(|ci| x[(ci / n1) * len + (ci % n1) * nmod + k]).collect();
            self.solve_mode(k, &b)
        });
        let mut out = vec![ZERO; x.len()];
        for (k, sol) in local.into_iter().enumerate() {
            for (ci, v) in sol.into_iter().enumerate() {
                out[(ci / n1) * len + (ci % n1) * nmod + k] = v;
            }
        }
        out
    }
}

/// Everything that depends on the wall data but not on the frozen iterate.
pub struct LinearizedSetup {
    grid: Arc<ChannelGrid>,
    params: Params,
    fc: FormCoefficients,
    interior: Vec<PointCoeffs>,
    wall: [Vec<f64>; 2],
    wall_grad: [[Vec<f64>; 2]; 2],
    rhs_face: [[Vec<C64>; 3]; 2],
    /// `w_u / mu_bar`, `w_z / kappa_bar`, `n c_n / mu_bar` on the padded grid.
    rhs_weights: [Vec<f64>; 3],
    precond: Arc<BlockPreconditioner>,
    ext: ExtendedTemperature,
}

impl LinearizedSetup {
    /// Refuses parameters that fail the admissibility check.
    pub fn new(
        grid: &Arc<ChannelGrid>,
        params: &Params,
        bt: &BoundaryTemperature,
        ext: &ExtendedTemperature,
    ) -> Result<Self> {
        let report = check_assumption(params, &LambdaGrid::default())?;
        if !report.admissible {
            return Err(Error::Inadmissible(format!(
                "condition1 = {:.6e}, best smallest eigenvalue = {:.6e}",
                report.condition1_value, report.min_eigenvalue
            )));
        }
        let fc = FormCoefficients::new(params, true);
        let op = ModeOperator::constant(grid, &fc, params.theta_bar(), params.rho_bar());
        let precond = Arc::new(BlockPreconditioner::new(&op)?);
        Self::build(grid, params, bt, ext, fc, precond)
    }

    /// Same wall data with the coupling constant removed from the heat
    /// equation; shares the preconditioner.
    pub fn without_cal_r(&self, bt: &BoundaryTemperature) -> Result<Self> {
        let fc = FormCoefficients::new(&self.params, false);
        Self::build(&self.grid, &self.params, bt, &self.ext, fc, self.precond.clone())
    }

    fn build(
        grid: &Arc<ChannelGrid>,
        params: &Params,
        bt: &BoundaryTemperature,
        ext: &ExtendedTemperature,
        fc: FormCoefficients,
        precond: Arc<BlockPreconditioner>,
    ) -> Result<Self> {
        let q2 = grid.padded() * grid.padded();
        if !(ext.tilde.to_physical().min() > 0.0) {
            return Err(Error::Domain("extended wall temperature is not positive".into()));
        }
        let tc = ext.tilde.coefficients();
        let th = grid.synth_quad(&grid.to_quad(tc, false));
        let gth = [
            grid.synth_quad(&grid.to_quad(tc, true)),
            grid.synth_quad(&grid.to_quad(ext.tilde.derivative(2).coefficients(), false)),
            grid.synth_quad(&grid.to_quad(ext.tilde.derivative(3).coefficients(), false)),
        ];
        if !(th.iter().fold(f64::INFINITY, |a, &b| a.min(b)) > 0.0) {
            return Err(Error::Domain("extended wall temperature is not positive".into()));
        }
        let xq = grid.quad_x1();
        let interior: Vec<PointCoeffs> = (0..th.len())
            .map(|p| fc.point(th[p], [gth[0][p], gth[1][p], gth[2][p]], 2.0 * xq[p / q2] - 1.0))
            .collect();
        let rhs_weights = [
            th.iter().map(|&t| fc.wu(t) / fc.mu_bar).collect(),
            th.iter().map(|&t| fc.wz(t) / fc.kappa_bar).collect(),
            th.iter().enumerate().map(|(p, &t)| (2.0 * xq[p / q2] - 1.0) * fc.cn(t) / fc.mu_bar).collect(),
        ];
        let d1 = ext.tilde.derivative(1);
        let wall = [0, 1].map(|f| bt.faces[f].to_physical());
        let wall_grad = [0, 1].map(|f| [2, 3].map(|ax| bt.faces[f].derivative(ax).to_physical()));
        let rhs_face = [0, 1].map(|f| {
            let normal = if f == 0 { -1.0 } else { 1.0 };
            let dn = d1.trace(f).to_physical();
            let tang = [0, 1].map(|j| {
                let v: Vec<f64> = wall[f].iter().zip(&wall_grad[f][j]).map(|(&t, &gt)| fc.pair(t) * gt).collect();
                FaceField::from_physical(grid, &v).coefficients().to_vec()
            });
            let v: Vec<f64> = wall[f].iter().zip(&dn).map(|(&t, &d)| -fc.wz(t) * normal * d).collect();
            let [a, b] = tang;
            [a, b, FaceField::from_physical(grid, &v).coefficients().to_vec()]
        });
        Ok(LinearizedSetup {
            grid: grid.clone(),
            params: params.clone(),
            fc,
            interior,
            wall,
            wall_grad,
            rhs_face,
            rhs_weights,
            precond,
            ext: ext.clone(),
        })
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &FormCoefficients {
        &self.fc
    }

    pub fn preconditioner(&self) -> &Arc<BlockPreconditioner> {
        &self.precond
    }

    /// Builds the form and right-hand side for the frozen iterate `inputs`.
    pub fn assemble(&self, inputs: &State) -> Result<LinearizedProblem<'_>> {
        let g = &self.grid;
        let rho = self.params.rho_bar();
        let faces = [0, 1].map(|f| -> Result<Vec<FacePointCoeffs>> {
            let dens = inputs.phi.trace(f).to_physical();
            let lo = dens.iter().fold(f64::INFINITY, |a, &v| a.min(v + rho));
            if !(lo > 0.0) {
                return Err(Error::Domain(format!("face density on face {f} is not positive (min {lo:.3e})")));
            }
            Ok((0..dens.len())
                .map(|p| {
                    self.fc.face_point(
                        self.wall[f][p],
                        [self.wall_grad[f][0][p], self.wall_grad[f][1][p]],
                        dens[p] + rho,
                    )
                })
                .collect())
        });
        let [f0, f1] = faces;
        let faces = [f0?, f1?];

        let (r, theta_bar) = (self.params.r(), self.params.theta_bar());
        let f = compute_f(inputs, &self.ext, &self.params)?;
        let gsrc = compute_g(inputs, &self.ext, &self.params)?;
        let gphi = inputs.phi.gradient();
        let flux_pu: [ScalarField; 3] = std::array::from_fn(|b| inputs.phi.mul(&inputs.u.c[b]));
        let div_pu = flux_pu[0].derivative(1).add(&flux_pu[1].derivative(2)).add(&flux_pu[2].derivative(3));
        let on_quad = |f: &ScalarField| g.synth_quad(&g.to_quad(f.coefficients(), false));
        let mom: Vec<Vec<f64>> = (0..3).map(|a| on_quad(&f.c[a].axpy(-r * theta_bar, &gphi[a]))).collect();
        let heat = on_quad(&gsrc.axpy(-self.fc.cal_r, &div_pu));
        let [wu, wz, cnn] = &self.rhs_weights;
        let mut vol: Vec<Vec<f64>> = (0..3).map(|a| mom[a].iter().zip(wu).map(|(v, w)| v * w).collect()).collect();
        vol.push((0..heat.len()).map(|p| cnn[p] * mom[0][p] + wz[p] * heat[p]).collect());

        let (nmod, len) = (g.modes(), g.len());
        let mut rhs = vec![ZERO; 4 * len];
        for (c, v) in vol.iter().enumerate() {
            g.test_quad(&g.analyze_quad(v), false, &mut rhs[c * len..(c + 1) * len]);
        }
        for fidx in 0..2 {
            let i = g.face_node(fidx);
            for k in 0..nmod {
                rhs[len + i * nmod + k] += self.rhs_face[fidx][0][k];
                rhs[2 * len + i * nmod + k] += self.rhs_face[fidx][1][k];
                rhs[3 * len + i * nmod + k] += self.rhs_face[fidx][2][k];
            }
            rhs[i * nmod..(i + 1) * nmod].iter_mut().for_each(|v| *v = ZERO);
        }
        Ok(LinearizedProblem { setup: self, faces, rhs })
    }
}

#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub u: VectorField,
    pub zeta: ScalarField,
    pub iterations: usize,
    /// Relative residual `|B(w, .) - L| / |L|`.
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Assembled form and right-hand side for one application of the solution
/// operator.
pub struct LinearizedProblem<'a> {
    setup: &'a LinearizedSetup,
    faces: [Vec<FacePointCoeffs>; 2],
    rhs: Vec<C64>,
}

impl LinearizedProblem<'_> {
    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.setup.grid
    }

    pub fn rhs(&self) -> &[C64] {
        &self.rhs
    }

    /// The form applied to a packed trial vector, tested against every basis
    /// function (no constraint rows).
    pub fn apply_form(&self, x: &[C64]) -> Vec<C64> {
        let g = &self.setup.grid;
        let len = g.len();
        let (nmod, q) = (g.modes(), g.padded());
        let q2 = q * q;
        let nq = g.quad_len();
        let grads: Vec<Vec<f64>> = (0..4)
            .flat_map(|c| {
                let coef = &x[c * len..(c + 1) * len];
                let d1 = g.to_quad(coef, true);
                let v = g.to_quad(coef, false);
                let tang = |axis: usize| -> Vec<C64> {
                    v.iter()
                        .enumerate()
                        .map(|(idx, c)| {
                            let (m2, m3) = g.wavenumbers(idx % nmod);
                            let mj = if axis == 2 { m2 } else { m3 };
                            c * C64::new(0.0, TWO_PI * mj as f64)
                        })
                        .collect()
                };
                [g.synth_quad(&d1), g.synth_quad(&tang(2)), g.synth_quad(&tang(3))]
            })
            .collect();
        let mut pts = vec![[0.0f64; NFLUX]; nq * q2];
        let interior = &self.setup.interior;
        par::for_each_chunk(&mut pts, q2, |qi, slab| {
            for (pl, out) in slab.iter_mut().enumerate() {
                let p = qi * q2 + pl;
                let gr: [[f64; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| grads[3 * a + b][p]));
                let gz = [grads[9][p], grads[10][p], grads[11][p]];
                *out = interior_flux(&interior[p], &gr, &gz);
            }
        });
        let flux: Vec<Vec<C64>> = (0..NFLUX)
            .map(|c| {
                let vals: Vec<f64> = pts.iter().map(|v| v[c]).collect();
                g.analyze_quad(&vals)
            })
            .collect();
        let face = [0, 1].map(|f| {
            let i = g.face_node(f);
            let tr = |c: usize| FaceField::from_coefficients(g, x[c * len + i * nmod..c * len + (i + 1) * nmod].to_vec());
            let z = tr(3);
            let phys = [tr(1), tr(2), z.clone(), z.derivative(2), z.derivative(3)].map(|ff| ff.to_physical());
            let mut outs = vec![[0.0f64; 5]; q2];
            for (p, o) in outs.iter_mut().enumerate() {
                *o = face_flux(&self.faces[f][p], [phys[0][p], phys[1][p]], phys[2][p], [phys[3][p], phys[4][p]]);
            }
            std::array::from_fn(|c| {
                let v: Vec<f64> = outs.iter().map(|o| o[c]).collect();
                FaceField::from_physical(g, &v).coefficients().to_vec()
            })
        });
        let mut out = vec![ZERO; 4 * len];
        assemble_residual(g, &flux, &face, &mut out);
        out
    }

    /// Discrete operator including the identity rows for `u1` at the faces.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = self.apply_form(x);
        constrain(&self.setup.grid, x, &mut out);
        out
    }

    /// `B((u, zeta), (v, xi))`.
    pub fn bilinear(&self, trial: (&VectorField, &ScalarField), test: (&VectorField, &ScalarField)) -> f64 {
        let r = self.apply_form(&pack(trial.0, trial.1));
        let t = pack(test.0, test.1);
        t.iter().zip(&r).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `L((v, xi))`.
    pub fn functional(&self, test: (&VectorField, &ScalarField)) -> f64 {
        let t = pack(test.0, test.1);
        t.iter().zip(&self.rhs).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Relative residual of a candidate solution.
    pub fn residual_norm(&self, u: &VectorField, zeta: &ScalarField) -> f64 {
        let x = pack(u, zeta);
        let ax = self.apply(&x);
        let r: Vec<C64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let bn = krylov::norm(&self.rhs);
        let rn = krylov::norm(&r);
        if bn > 0.0 {
            rn / bn
        } else {
            rn
        }
    }

    /// Residual of the heat-equation rows relative to the full right-hand
    /// side.
    pub fn heat_residual_norm(&self, u: &VectorField, zeta: &ScalarField) -> f64 {
        let len = self.setup.grid.len();
        let x = pack(u, zeta);
        let ax = self.apply(&x);
        let r: Vec<C64> = self.rhs[3 * len..].iter().zip(&ax[3 * len..]).map(|(b, a)| b - a).collect();
        let bn = krylov::norm(&self.rhs);
        let rn = krylov::norm(&r);
        if bn > 0.0 {
            rn / bn
        } else {
            rn
        }
    }

    pub fn solve(&self, opts: &GmresOptions, warm: Option<(&VectorField, &ScalarField)>) -> Result<LinearSolution> {
        let g = &self.setup.grid;
        let x0 = match warm {
            Some((u, z)) => pack(&u.clone().enforce_tangency(), z),
            None => vec![ZERO; 4 * g.len()],
        };
        let out = krylov::gmres(|x| self.apply(x), |x| self.setup.precond.apply(x), &self.rhs, x0, opts);
        if !out.converged {
            return Err(Error::Stagnation {
                what: "linearized solve",
                iterations: out.iterations,
                residual: out.residual,
                history: out.history,
            });
        }
        let (u, zeta) = unpack(g, &out.x);
        Ok(LinearSolution {
            u: u.enforce_tangency(),
            zeta,
            iterations: out.iterations,
            residual: out.residual,
            history: out.history,
        })
    }

    /// Smallest `B(w, w) / (|u|_{H1}^2 + |zeta|_{H1}^2)` over random
    /// tangential samples with `x1` degree 3 and modes `|m| <= 2`.
    pub fn coercivity_probe(&self, samples: usize, seed: u64) -> f64 {
        let g = &self.setup.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::INFINITY;
        for _ in 0..samples {
            let (u, z) = random_pair(g, &mut rng);
            let q = self.bilinear((&u, &z), (&u, &z));
            let nrm = u.sobolev_norm(1).powi(2) + z.sobolev_norm(1).powi(2);
            if nrm > 0.0 {
                best = best.min(q / nrm);
            }
        }
        best
    }
}

/// Random smooth tangential velocity and temperature pair.
pub fn random_pair(grid: &Arc<ChannelGrid>, rng: &mut impl Rng) -> (VectorField, ScalarField) {
    let mut f = |tangential: bool| {
        let mut amps = Vec::new();
        let mm = grid.m().min(2) as i64;
        for m2 in -mm..=mm {
            for m3 in -mm..=mm {
                let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let ph: f64 = rng.gen_range(0.0..TWO_PI);
                amps.push((m2, m3, c, ph));
            }
        }
        ScalarField::from_fn(grid, move |x1, x2, x3| {
            let poly = |c: &[f64; 4]| {
                let p = c[0] + c[1] * x1 + c[2] * x1 * x1 + c[3] * x1 * x1 * x1;
                if tangential {
                    x1 * (1.0 - x1) * p
                } else {
                    p
                }
            };
            amps.iter()
                .map(|(m2, m3, c, ph)| poly(c) * (TWO_PI * (*m2 as f64 * x2 + *m3 as f64 * x3) + ph).cos())
                .sum()
        })
    };
    let u = VectorField::new([f(true), f(false), f(false)]).enforce_tangency();
    let z = f(false);
    (u, z)
}
