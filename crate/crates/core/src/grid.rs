//! Fourier x Chebyshev discretization of the channel `(0,1) x T^2`.
//!
//! A [`ScalarField`] stores, for every Chebyshev-Gauss-Lobatto node `x1_i`,
//! the Fourier coefficients `f_m(x1_i)` for `|m2|, |m3| <= M`, laid out as
//! `[i][m2 + M][m3 + M]`. Products and nonlinear maps are formed on a padded
//! physical grid of `Q >= 3M + 1` points per torus direction and truncated
//! back, which removes aliasing from quadratic terms.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par;

const TWO_PI: f64 = 2.0 * PI;

/// Forward/inverse transforms on a `q x q` torus grid.
struct TorusFft {
    q: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl TorusFft {
    fn new(q: usize, planner: &mut FftPlanner<f64>) -> Self {
        TorusFft { q, fwd: planner.plan_fft_forward(q), inv: planner.plan_fft_inverse(q) }
    }

    #[inline]
    fn wrap(&self, k: isize) -> usize {
        k.rem_euclid(self.q as isize) as usize
    }

    /// Coefficients `[a][b]` (`a = m2 + M`) to physical values `[q2][q3]`.
    fn synth(&self, m: usize, coef: &[C64], out: &mut [f64]) {
        let q = self.q;
        let nm = 2 * m + 1;
        let mut buf = vec![C64::new(0.0, 0.0); q * q];
        for a in 0..nm {
            let row = self.wrap(a as isize - m as isize);
            let dst = &mut buf[row * q..(row + 1) * q];
            for b in 0..nm {
                dst[self.wrap(b as isize - m as isize)] = coef[a * nm + b];
            }
            self.inv.process(dst);
        }
        let mut t = vec![C64::new(0.0, 0.0); q * q];
        for r in 0..q {
            for c in 0..q {
                t[c * q + r] = buf[r * q + c];
            }
        }
        self.inv.process(&mut t);
        for q3 in 0..q {
            for q2 in 0..q {
                out[q2 * q + q3] = t[q3 * q + q2].re;
            }
        }
    }

    /// Physical values `[q2][q3]` to truncated coefficients `[a][b]`,
    /// symmetrized so that the result is exactly Hermitian.
    fn analyze(&self, m: usize, vals: &[f64], coef: &mut [C64]) {
        let q = self.q;
        let nm = 2 * m + 1;
        let mut buf: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        let mut t = vec![C64::new(0.0, 0.0); nm * q];
        for b in 0..nm {
            let col = self.wrap(b as isize - m as isize);
            for q2 in 0..q {
                t[b * q + q2] = buf[q2 * q + col];
            }
        }
        self.fwd.process(&mut t);
        let scale = 1.0 / (q * q) as f64;
        for a in 0..nm {
            let k2 = self.wrap(a as isize - m as isize);
            for b in 0..nm {
                coef[a * nm + b] = t[b * q + k2] * scale;
            }
        }
        hermitize(nm, coef);
    }
}

/// Replaces `c(m)` by `(c(m) + conj(c(-m))) / 2` on one `nm x nm` block.
fn hermitize(nm: usize, c: &mut [C64]) {
    let n = nm * nm;
    for idx in 0..n {
        let j = n - 1 - idx;
        if j < idx {
            break;
        }
        let avg = 0.5 * (c[idx] + c[j].conj());
        c[idx] = avg;
        c[j] = avg.conj();
    }
}

fn smooth_size(min: usize) -> usize {
    let mut q = min.max(1);
    loop {
        let mut r = q;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return q;
        }
        q += 1;
    }
}

/// Clenshaw-Curtis weights for the CGL nodes, rescaled to `[0, 1]`.
fn clenshaw_curtis(n1: usize) -> Vec<f64> {
    let n = n1 - 1;
    let nf = n as f64;
    let mut w = vec![0.0; n1];
    let end = if n % 2 == 0 { 1.0 / (nf * nf - 1.0) } else { 1.0 / (nf * nf) };
    w[0] = end;
    w[n] = end;
    for (j, wj) in w.iter_mut().enumerate().take(n).skip(1) {
        let th = PI * j as f64 / nf;
        let mut v = 1.0;
        if n % 2 == 0 {
            for k in 1..n / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0);
            }
            v -= (nf * th).cos() / (nf * nf - 1.0);
        } else {
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        *wj = 2.0 * v / nf;
    }
    w.iter().map(|v| 0.5 * v).collect()
}

/// CGL nodes on `[0, 1]`, increasing, with exact endpoints.
fn cgl_nodes(n: usize) -> Vec<f64> {
    let nf = (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == 0 {
                0.0
            } else if i == n - 1 {
                1.0
            } else {
                0.5 * (1.0 - (PI * i as f64 / nf).cos())
            }
        })
        .collect()
}

fn bary_weights(n1: usize) -> Vec<f64> {
    (0..n1)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n1 - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// The discretization: `n1` CGL nodes on `[0,1]` and Fourier modes
/// `|m2|, |m3| <= m` on the unit torus.
pub struct ChannelGrid {
    n1: usize,
    m: usize,
    x1: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
    diff1: Vec<f64>,
    pad: TorusFft,
    dump: TorusFft,
    quad: QuadRule,
}

/// Nested CGL rule with `2 N1 - 1` nodes used to integrate products of two
/// degree `N1 - 1` polynomials exactly. Node `2i` is solution node `i`.
struct QuadRule {
    x: Vec<f64>,
    w: Vec<f64>,
    /// `nq x n1` values of the Lagrange basis at the quadrature nodes.
    interp: Vec<f64>,
    /// Same for the basis derivatives.
    interp_d: Vec<f64>,
}

impl fmt::Debug for ChannelGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelGrid")
            .field("n1", &self.n1)
            .field("m", &self.m)
            .field("pad", &self.pad.q)
            .finish()
    }
}

impl ChannelGrid {
    pub fn new(n1: usize, m: usize) -> Result<Arc<Self>> {
        if n1 < 8 {
            return Err(Error::InvalidParams(format!("N1 must be at least 8, got {n1}")));
        }
        if m < 1 {
            return Err(Error::InvalidParams("M must be at least 1".into()));
        }
        let x1 = cgl_nodes(n1);
        let bary = bary_weights(n1);
        let mut diff1 = vec![0.0; n1 * n1];
        for i in 0..n1 {
            let mut diag = 0.0;
            for j in 0..n1 {
                if i != j {
                    let d = bary[j] / bary[i] / (x1[i] - x1[j]);
                    diff1[i * n1 + j] = d;
                    diag -= d;
                }
            }
            diff1[i * n1 + i] = diag;
        }
        let mut planner = FftPlanner::new();
        let pad = TorusFft::new(smooth_size(3 * m + 1), &mut planner);
        let dump = TorusFft::new(2 * m + 1, &mut planner);
        let mut grid = ChannelGrid {
            n1,
            m,
            x1,
            weights: clenshaw_curtis(n1),
            bary,
            diff1,
            pad,
            dump,
            quad: QuadRule { x: Vec::new(), w: Vec::new(), interp: Vec::new(), interp_d: Vec::new() },
        };
        let nq = 2 * n1 - 1;
        let qx = cgl_nodes(nq);
        let mut interp = vec![0.0; nq * n1];
        for (q, &x) in qx.iter().enumerate() {
            let row = if q % 2 == 0 {
                let mut r = vec![0.0; n1];
                r[q / 2] = 1.0;
                r
            } else {
                grid.interpolation_row(x)
            };
            interp[q * n1..(q + 1) * n1].copy_from_slice(&row);
        }
        let mut interp_d = vec![0.0; nq * n1];
        for q in 0..nq {
            for i in 0..n1 {
                interp_d[q * n1 + i] = (0..n1).map(|j| interp[q * n1 + j] * grid.diff1[j * n1 + i]).sum();
            }
        }
        grid.quad = QuadRule { x: qx, w: clenshaw_curtis(nq), interp, interp_d };
        Ok(Arc::new(grid))
    }

    /// Nodes of the quadrature grid.
    pub fn quad_x1(&self) -> &[f64] {
        &self.quad.x
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad.w
    }

    /// Row-major `nq x n1` basis values (or derivatives) at the quadrature
    /// nodes.
    pub(crate) fn quad_basis(&self, derivative: bool) -> &[f64] {
        if derivative {
            &self.quad.interp_d
        } else {
            &self.quad.interp
        }
    }

    pub fn quad_len(&self) -> usize {
        self.quad.x.len()
    }

    /// Values (or x1 derivatives) of a coefficient array `[i][k]` at the
    /// quadrature nodes, as `[q][k]`.
    pub(crate) fn to_quad(&self, coef: &[C64], derivative: bool) -> Vec<C64> {
        let nmod = self.modes();
        let n1 = self.n1;
        let e = if derivative { &self.quad.interp_d } else { &self.quad.interp };
        let mut out = vec![C64::new(0.0, 0.0); self.quad_len() * nmod];
        par::for_each_chunk(&mut out, nmod, |q, row| {
            for i in 0..n1 {
                let c = e[q * n1 + i];
                if c != 0.0 {
                    row.iter_mut().zip(&coef[i * nmod..(i + 1) * nmod]).for_each(|(o, v)| *o += v * c);
                }
            }
        });
        out
    }

    /// `sum_q w_q E[q][i] a[q]` (or with the derivative basis): tests
    /// quadrature-node data against every nodal basis function.
    pub(crate) fn test_quad(&self, a: &[C64], derivative: bool, out: &mut [C64]) {
        let nmod = self.modes();
        let (n1, nq) = (self.n1, self.quad_len());
        let e = if derivative { &self.quad.interp_d } else { &self.quad.interp };
        let w = &self.quad.w;
        par::for_each_chunk(out, nmod, |i, row| {
            for q in 0..nq {
                let c = e[q * n1 + i] * w[q];
                if c != 0.0 {
                    row.iter_mut().zip(&a[q * nmod..(q + 1) * nmod]).for_each(|(o, v)| *o += v * c);
                }
            }
        });
    }

    /// Coefficients `[q][k]` to physical values on the padded grid of every
    /// quadrature node.
    pub(crate) fn synth_quad(&self, coef: &[C64]) -> Vec<f64> {
        let mut out = vec![0.0; self.quad_len() * self.pad.q * self.pad.q];
        self.synth_slabs(coef, &mut out);
        out
    }

    pub(crate) fn analyze_quad(&self, vals: &[f64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.quad_len() * self.modes()];
        self.analyze_slabs(vals, &mut out);
        out
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn m(&self) -> usize {
        self.m
    }
    /// Modes per torus direction, `2M + 1`.
    pub fn nm(&self) -> usize {
        2 * self.m + 1
    }
    /// Number of Fourier modes per node, `(2M + 1)^2`.
    pub fn modes(&self) -> usize {
        self.nm() * self.nm()
    }
    pub fn len(&self) -> usize {
        self.n1 * self.modes()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Points per torus direction on the padded physical grid.
    pub fn padded(&self) -> usize {
        self.pad.q
    }
    pub fn x1(&self) -> &[f64] {
        &self.x1
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Row-major `n1 x n1` differentiation matrix.
    pub fn diff1(&self) -> &[f64] {
        &self.diff1
    }

    /// Wavenumbers `(m2, m3)` of mode index `k`.
    #[inline]
    pub fn wavenumbers(&self, k: usize) -> (isize, isize) {
        let nm = self.nm();
        let m = self.m as isize;
        ((k / nm) as isize - m, (k % nm) as isize - m)
    }

    /// Mode index of `(m2, m3)`, if inside the truncation.
    pub fn mode_index(&self, m2: isize, m3: isize) -> Option<usize> {
        let m = self.m as isize;
        if m2.abs() > m || m3.abs() > m {
            return None;
        }
        Some(((m2 + m) as usize) * self.nm() + (m3 + m) as usize)
    }

    /// Index of the mode `-m` for mode index `k`.
    #[inline]
    pub fn conjugate_index(&self, k: usize) -> usize {
        self.modes() - 1 - k
    }

    pub(crate) fn face_node(&self, face: usize) -> usize {
        if face == 0 {
            0
        } else {
            self.n1 - 1
        }
    }

    /// Barycentric interpolation weights of the nodal values at `x`.
    pub fn interpolation_row(&self, x: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.n1];
        if let Some(j) = self.x1.iter().position(|&xj| (x - xj).abs() < 1e-15) {
            row[j] = 1.0;
            return row;
        }
        let mut denom = 0.0;
        for j in 0..self.n1 {
            let t = self.bary[j] / (x - self.x1[j]);
            row[j] = t;
            denom += t;
        }
        row.iter_mut().for_each(|v| *v /= denom);
        row
    }

    /// Applies the x1 differentiation matrix to a coefficient array laid out
    /// as `[i][k]` with `stride` entries per node. Rows are applied to
    /// differences `f_j - f_i`, so constants differentiate to exactly zero.
    pub(crate) fn apply_diff1(&self, src: &[C64], dst: &mut [C64], stride: usize) {
        let n1 = self.n1;
        par::for_each_chunk(dst, stride, |i, out| {
            out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let own = &src[i * stride..(i + 1) * stride];
            for j in (0..n1).filter(|&j| j != i) {
                let d = self.diff1[i * n1 + j];
                let s = &src[j * stride..(j + 1) * stride];
                for ((o, v), w) in out.iter_mut().zip(s).zip(own) {
                    *o += (v - w) * d;
                }
            }
        });
    }

    fn synth_slabs(&self, coef: &[C64], out: &mut [f64]) {
        let (nmod, q2) = (self.modes(), self.pad.q * self.pad.q);
        par::for_each_chunk(out, q2, |i, o| self.pad.synth(self.m, &coef[i * nmod..(i + 1) * nmod], o));
    }

    fn analyze_slabs(&self, vals: &[f64], coef: &mut [C64]) {
        let (nmod, q2) = (self.modes(), self.pad.q * self.pad.q);
        par::for_each_chunk(coef, nmod, |i, c| self.pad.analyze(self.m, &vals[i * q2..(i + 1) * q2], c));
    }

    /// Coordinates of padded-grid point `q` in one torus direction.
    pub fn padded_coord(&self, q: usize) -> f64 {
        q as f64 / self.pad.q as f64
    }
}

/// A real scalar field on the channel, stored spectrally.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<ChannelGrid>,
    coef: Vec<C64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({:?}, L2={:.3e})", self.grid, self.l2_norm())
    }
}

/// Values of a field on the padded physical grid, laid out `[i][q2][q3]`.
#[derive(Clone, Debug)]
pub struct PhysField {
    grid: Arc<ChannelGrid>,
    pub vals: Vec<f64>,
}

impl PhysField {
    pub fn new(grid: &Arc<ChannelGrid>, vals: Vec<f64>) -> Self {
        assert_eq!(vals.len(), grid.n1() * grid.padded() * grid.padded());
        PhysField { grid: grid.clone(), vals }
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PhysField {
        PhysField { grid: self.grid.clone(), vals: self.vals.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &PhysField, f: impl Fn(f64, f64) -> f64) -> PhysField {
        PhysField {
            grid: self.grid.clone(),
            vals: self.vals.iter().zip(&other.vals).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_spectral(&self) -> ScalarField {
        let mut coef = vec![C64::new(0.0, 0.0); self.grid.len()];
        self.grid.analyze_slabs(&self.vals, &mut coef);
        ScalarField { grid: self.grid.clone(), coef }
    }
}

impl ScalarField {
    pub fn zeros(grid: &Arc<ChannelGrid>) -> Self {
        ScalarField { grid: grid.clone(), coef: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn constant(grid: &Arc<ChannelGrid>, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        let k0 = grid.mode_index(0, 0).unwrap_or(0);
        for i in 0..grid.n1 {
            f.coef[i * grid.modes() + k0] = C64::new(c, 0.0);
        }
        f
    }

    /// Wraps raw coefficients (layout `[i][m2+M][m3+M]`).
    pub fn from_coefficients(grid: &Arc<ChannelGrid>, coef: Vec<C64>) -> Result<Self> {
        if coef.len() != grid.len() {
            return Err(Error::InvalidParams(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coef.len()
            )));
        }
        Ok(ScalarField { grid: grid.clone(), coef })
    }

    /// Samples `f(x1, x2, x3)` on the padded grid and projects onto the
    /// retained modes.
    pub fn from_fn(grid: &Arc<ChannelGrid>, f: impl Fn(f64, f64, f64) -> f64 + Sync) -> Self {
        let q = grid.padded();
        let q2 = q * q;
        let mut vals = vec![0.0; grid.n1 * q2];
        par::for_each_chunk(&mut vals, q2, |i, slab| {
            let x1 = grid.x1[i];
            for a in 0..q {
                for b in 0..q {
                    slab[a * q + b] = f(x1, grid.padded_coord(a), grid.padded_coord(b));
                }
            }
        });
        PhysField { grid: grid.clone(), vals }.to_spectral()
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coef
    }

    pub fn coefficients_mut(&mut self) -> &mut [C64] {
        &mut self.coef
    }

    pub fn into_coefficients(self) -> Vec<C64> {
        self.coef
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize) -> C64 {
        self.coef[i * self.grid.modes() + k]
    }

    pub fn to_physical(&self) -> PhysField {
        let q = self.grid.padded();
        let mut vals = vec![0.0; self.grid.n1 * q * q];
        self.grid.synth_slabs(&self.coef, &mut vals);
        PhysField { grid: self.grid.clone(), vals }
    }

    /// `d/dx_axis`, axis in `1..=3`.
    pub fn derivative(&self, axis: usize) -> ScalarField {
        let g = &self.grid;
        let mut out = Self::zeros(g);
        match axis {
            1 => g.apply_diff1(&self.coef, &mut out.coef, g.modes()),
            2 | 3 => {
                let nmod = g.modes();
                for (idx, (o, c)) in out.coef.iter_mut().zip(&self.coef).enumerate() {
                    let (m2, m3) = g.wavenumbers(idx % nmod);
                    let mj = if axis == 2 { m2 } else { m3 };
                    *o = c * C64::new(0.0, TWO_PI * mj as f64);
                }
            }
            _ => panic!("axis must be 1, 2 or 3"),
        }
        out
    }

    pub fn gradient(&self) -> [ScalarField; 3] {
        [self.derivative(1), self.derivative(2), self.derivative(3)]
    }

    /// Integral over the channel.
    pub fn integrate(&self) -> f64 {
        let g = &self.grid;
        let k0 = g.mode_index(0, 0).unwrap_or(0);
        (0..g.n1).map(|i| g.weights[i] * self.at(i, k0).re).sum()
    }

    /// `int f g` via Parseval on the torus and quadrature in x1.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        let g = &self.grid;
        let nmod = g.modes();
        let mut total = 0.0;
        for i in 0..g.n1 {
            let a = &self.coef[i * nmod..(i + 1) * nmod];
            let b = &other.coef[i * nmod..(i + 1) * nmod];
            let s: f64 = a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum();
            total += g.weights[i] * s;
        }
        total
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Discrete `H^k` norm: all mixed derivatives of total order `<= k`.
    pub fn sobolev_norm(&self, k: usize) -> f64 {
        let g = &self.grid;
        let nmod = g.modes();
        // Tangential symbol sums  sum_{a2+a3<=r} (2 pi m2)^{2 a2} (2 pi m3)^{2 a3}.
        let symbol = |kidx: usize, r: usize| -> f64 {
            let (m2, m3) = g.wavenumbers(kidx);
            let (s2, s3) = ((TWO_PI * m2 as f64).powi(2), (TWO_PI * m3 as f64).powi(2));
            let mut acc = 0.0;
            for a2 in 0..=r {
                for a3 in 0..=(r - a2) {
                    acc += s2.powi(a2 as i32) * s3.powi(a3 as i32);
                }
            }
            acc
        };
        let mut cur = self.clone();
        let mut total = 0.0;
        for a1 in 0..=k {
            let weights: Vec<f64> = (0..nmod).map(|kk| symbol(kk, k - a1)).collect();
            for i in 0..g.n1 {
                let row = &cur.coef[i * nmod..(i + 1) * nmod];
                let s: f64 = row.iter().zip(&weights).map(|(c, w)| c.norm_sqr() * w).sum();
                total += g.weights[i] * s;
            }
            if a1 < k {
                cur = cur.derivative(1);
            }
        }
        total.max(0.0).sqrt()
    }

    pub fn trace(&self, face: usize) -> FaceField {
        assert!(face <= 1, "face must be 0 or 1");
        let g = &self.grid;
        let i = g.face_node(face);
        let nmod = g.modes();
        FaceField { grid: g.clone(), coef: self.coef[i * nmod..(i + 1) * nmod].to_vec() }
    }

    pub fn project_zero_mean(&self) -> ScalarField {
        let mean = self.integrate();
        let mut out = self.clone();
        out.add_constant(-mean);
        out
    }

    pub fn add_constant(&mut self, c: f64) {
        let g = &self.grid;
        let k0 = g.mode_index(0, 0).unwrap_or(0);
        for i in 0..g.n1 {
            self.coef[i * g.modes() + k0] += c;
        }
    }

    /// Dealiased product.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let a = self.to_physical();
        let b = other.to_physical();
        a.zip(&b, |x, y| x * y).to_spectral()
    }

    /// Pointwise nonlinear map evaluated on the padded grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        self.to_physical().map(f).to_spectral()
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), coef: self.coef.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            coef: self.coef.iter().zip(&other.coef).map(|(x, y)| x + y * a).collect(),
        }
    }

    /// Largest `|f_m - conj(f_{-m})|` over nodes and modes.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let nmod = g.modes();
        let mut worst = 0.0f64;
        for i in 0..g.n1 {
            for k in 0..nmod {
                let d = self.at(i, k) - self.at(i, g.conjugate_index(k)).conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Point evaluation (barycentric in x1, Fourier sum on the torus).
    pub fn eval(&self, x1: f64, x2: f64, x3: f64) -> f64 {
        let g = &self.grid;
        let row = g.interpolation_row(x1);
        let nmod = g.modes();
        let mut acc = 0.0;
        for k in 0..nmod {
            let (m2, m3) = g.wavenumbers(k);
            let ph = TWO_PI * (m2 as f64 * x2 + m3 as f64 * x3);
            let e = C64::new(ph.cos(), ph.sin());
            let mut c = C64::new(0.0, 0.0);
            for (i, r) in row.iter().enumerate() {
                if *r != 0.0 {
                    c += self.at(i, k) * *r;
                }
            }
            acc += (c * e).re;
        }
        acc
    }

    /// Re-expresses the field on another grid: polynomial interpolation in
    /// x1 and zero-padding / truncation of the Fourier modes.
    pub fn resample(&self, target: &Arc<ChannelGrid>) -> ScalarField {
        let src = &self.grid;
        let mut out = ScalarField::zeros(target);
        let mm = src.m.min(target.m) as isize;
        let rows: Vec<Vec<f64>> = target.x1.iter().map(|&x| src.interpolation_row(x)).collect();
        for (it, row) in rows.iter().enumerate() {
            for m2 in -mm..=mm {
                for m3 in -mm..=mm {
                    let ks = src.mode_index(m2, m3).unwrap_or(0);
                    let kt = target.mode_index(m2, m3).unwrap_or(0);
                    // Offsets from the first node keep constants exact.
                    let base = self.at(0, ks);
                    let mut c = base;
                    for (is, r) in row.iter().enumerate().skip(1) {
                        if *r != 0.0 {
                            c += (self.at(is, ks) - base) * *r;
                        }
                    }
                    out.coef[it * target.modes() + kt] = c;
                }
            }
        }
        out
    }

    /// Values on the `N1 x (2M+1) x (2M+1)` grid of CGL nodes times
    /// equispaced torus points, laid out `[i][q2][q3]`.
    pub fn sample_dump_grid(&self) -> Vec<f64> {
        let g = &self.grid;
        let nmod = g.modes();
        let mut out = vec![0.0; g.n1 * nmod];
        par::for_each_chunk(&mut out, nmod, |i, o| {
            g.dump.synth(g.m, &self.coef[i * nmod..(i + 1) * nmod], o)
        });
        out
    }

    /// Inverse of [`ScalarField::sample_dump_grid`]; exact for fields in the
    /// retained band.
    pub fn from_dump_grid(grid: &Arc<ChannelGrid>, vals: &[f64]) -> Result<Self> {
        let nmod = grid.modes();
        if vals.len() != grid.n1 * nmod {
            return Err(Error::InvalidParams(format!(
                "expected {} samples, got {}",
                grid.n1 * nmod,
                vals.len()
            )));
        }
        let mut coef = vec![C64::new(0.0, 0.0); grid.len()];
        par::for_each_chunk(&mut coef, nmod, |i, c| {
            grid.dump.analyze(grid.m, &vals[i * nmod..(i + 1) * nmod], c)
        });
        Ok(ScalarField { grid: grid.clone(), coef })
    }
}

/// The field `2 x1 - 1`, equal to the x1 component of the outward normal at
/// both faces.
pub fn weight_n(grid: &Arc<ChannelGrid>) -> ScalarField {
    ScalarField::from_fn(grid, |x1, _, _| 2.0 * x1 - 1.0)
}

/// A real field on one face `{p} x T^2`.
#[derive(Clone)]
pub struct FaceField {
    grid: Arc<ChannelGrid>,
    coef: Vec<C64>,
}

impl fmt::Debug for FaceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FaceField(L2={:.3e})", self.l2_norm())
    }
}

impl FaceField {
    pub fn zeros(grid: &Arc<ChannelGrid>) -> Self {
        FaceField { grid: grid.clone(), coef: vec![C64::new(0.0, 0.0); grid.modes()] }
    }

    pub fn constant(grid: &Arc<ChannelGrid>, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coef[grid.mode_index(0, 0).unwrap_or(0)] = C64::new(c, 0.0);
        f
    }

    pub fn from_fn(grid: &Arc<ChannelGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let q = grid.padded();
        let mut vals = vec![0.0; q * q];
        for a in 0..q {
            for b in 0..q {
                vals[a * q + b] = f(grid.padded_coord(a), grid.padded_coord(b));
            }
        }
        Self::from_physical(grid, &vals)
    }

    pub fn from_coefficients(grid: &Arc<ChannelGrid>, coef: Vec<C64>) -> Self {
        assert_eq!(coef.len(), grid.modes());
        FaceField { grid: grid.clone(), coef }
    }

    pub(crate) fn from_physical(grid: &Arc<ChannelGrid>, vals: &[f64]) -> Self {
        let mut coef = vec![C64::new(0.0, 0.0); grid.modes()];
        grid.pad.analyze(grid.m, vals, &mut coef);
        FaceField { grid: grid.clone(), coef }
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coef
    }

    /// Values on the padded torus grid, `[q2][q3]`.
    pub fn to_physical(&self) -> Vec<f64> {
        let q = self.grid.padded();
        let mut out = vec![0.0; q * q];
        self.grid.pad.synth(self.grid.m, &self.coef, &mut out);
        out
    }

    /// Tangential derivative, axis 2 or 3.
    pub fn derivative(&self, axis: usize) -> FaceField {
        assert!(axis == 2 || axis == 3, "face derivative axis must be 2 or 3");
        let g = &self.grid;
        let coef = self
            .coef
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (m2, m3) = g.wavenumbers(k);
                let mj = if axis == 2 { m2 } else { m3 };
                c * C64::new(0.0, TWO_PI * mj as f64)
            })
            .collect();
        FaceField { grid: g.clone(), coef }
    }

    pub fn mul(&self, other: &FaceField) -> FaceField {
        let a = self.to_physical();
        let b = other.to_physical();
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::from_physical(&self.grid, &p)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FaceField {
        let v: Vec<f64> = self.to_physical().into_iter().map(f).collect();
        Self::from_physical(&self.grid, &v)
    }

    pub fn axpy(&self, a: f64, other: &FaceField) -> FaceField {
        FaceField {
            grid: self.grid.clone(),
            coef: self.coef.iter().zip(&other.coef).map(|(x, y)| x + y * a).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> FaceField {
        FaceField { grid: self.grid.clone(), coef: self.coef.iter().map(|c| c * s).collect() }
    }

    pub fn add_constant(&mut self, c: f64) {
        let k0 = self.grid.mode_index(0, 0).unwrap_or(0);
        self.coef[k0] += c;
    }

    pub fn integrate(&self) -> f64 {
        self.coef[self.grid.mode_index(0, 0).unwrap_or(0)].re
    }

    pub fn inner(&self, other: &FaceField) -> f64 {
        self.coef.iter().zip(&other.coef).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Discrete `H^k(T^2)` norm.
    pub fn sobolev_norm(&self, k: usize) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for (idx, c) in self.coef.iter().enumerate() {
            let (m2, m3) = g.wavenumbers(idx);
            let (s2, s3) = ((TWO_PI * m2 as f64).powi(2), (TWO_PI * m3 as f64).powi(2));
            let mut w = 0.0;
            for a2 in 0..=k {
                for a3 in 0..=(k - a2) {
                    w += s2.powi(a2 as i32) * s3.powi(a3 as i32);
                }
            }
            total += c.norm_sqr() * w;
        }
        total.sqrt()
    }

    /// Minimum over the padded torus grid.
    pub fn min(&self) -> f64 {
        self.to_physical().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.to_physical().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self, x2: f64, x3: f64) -> f64 {
        let g = &self.grid;
        self.coef
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (m2, m3) = g.wavenumbers(k);
                let ph = TWO_PI * (m2 as f64 * x2 + m3 as f64 * x3);
                (c * C64::new(ph.cos(), ph.sin())).re
            })
            .sum()
    }
}

/// Bare boundary pairing on one face:
/// `sum_{j=2,3} sum_m 2 pi i m_j (conj(a_m) b_m - conj(c_m) d_m)`,
/// which equals `sum_j int (a d_j b - c d_j d)`. The slip prefactor is left
/// to the caller.
pub fn half_derivative_pairing(a: &FaceField, b: &FaceField, c: &FaceField, d: &FaceField) -> f64 {
    let g = &a.grid;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..g.modes() {
        let (m2, m3) = g.wavenumbers(k);
        let sym = C64::new(0.0, TWO_PI * (m2 + m3) as f64);
        acc += sym * (a.coef[k].conj() * b.coef[k] - c.coef[k].conj() * d.coef[k]);
    }
    debug_assert!(acc.im.abs() <= 1e-9 * (1.0 + acc.re.abs()), "pairing has imaginary part {}", acc.im);
    acc.re
}

/// [`half_derivative_pairing`] summed over both faces; each argument holds
/// the field on face 0 and face 1.
pub fn half_derivative_pairing_faces(
    a: &[FaceField; 2],
    b: &[FaceField; 2],
    c: &[FaceField; 2],
    d: &[FaceField; 2],
) -> f64 {
    (0..2).map(|p| half_derivative_pairing(&a[p], &b[p], &c[p], &d[p])).sum()
}

/// Velocity-like field with three components. `tangential` records that the
/// normal component was constrained to vanish on both faces.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub c: [ScalarField; 3],
    tangential: bool,
}

impl VectorField {
    pub fn new(c: [ScalarField; 3]) -> Self {
        VectorField { c, tangential: false }
    }

    pub fn zeros(grid: &Arc<ChannelGrid>) -> Self {
        VectorField {
            c: [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)],
            tangential: true,
        }
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        self.c[0].grid()
    }

    /// Largest face L2 norm of `u1`.
    pub fn normal_trace_norm(&self) -> f64 {
        self.c[0].trace(0).l2_norm().max(self.c[0].trace(1).l2_norm())
    }

    /// Marks the field tangential after checking `u1 = 0` on both faces.
    pub fn into_tangential(mut self, tol: f64) -> Result<Self> {
        let n = self.normal_trace_norm();
        if n > tol {
            return Err(Error::Domain(format!("normal velocity trace {n:.3e} exceeds {tol:.1e}")));
        }
        self.tangential = true;
        Ok(self)
    }

    /// Zeroes the `u1` nodal values on both faces and sets the flag.
    pub fn enforce_tangency(mut self) -> Self {
        let g = self.grid().clone();
        let nmod = g.modes();
        for face in 0..2 {
            let i = g.face_node(face);
            self.c[0].coef[i * nmod..(i + 1) * nmod].iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        }
        self.tangential = true;
        self
    }

    pub fn is_tangential(&self) -> bool {
        self.tangential
    }

    pub fn divergence(&self) -> ScalarField {
        self.c[0].derivative(1).add(&self.c[1].derivative(2)).add(&self.c[2].derivative(3))
    }

    /// `grad[a][b] = d_b u_a`.
    pub fn gradient(&self) -> [[ScalarField; 3]; 3] {
        [self.c[0].gradient(), self.c[1].gradient(), self.c[2].gradient()]
    }

    pub fn sobolev_norm(&self, k: usize) -> f64 {
        self.c.iter().map(|c| c.sobolev_norm(k).powi(2)).sum::<f64>().sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0)
    }

    pub fn scale(&self, s: f64) -> VectorField {
        VectorField { c: self.c.clone().map(|c| c.scale(s)), tangential: self.tangential }
    }

    pub fn axpy(&self, a: f64, other: &VectorField) -> VectorField {
        VectorField {
            c: [0, 1, 2].map(|i| self.c[i].axpy(a, &other.c[i])),
            tangential: self.tangential && other.tangential,
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.axpy(-1.0, other)
    }

    pub fn resample(&self, target: &Arc<ChannelGrid>) -> VectorField {
        VectorField { c: [0, 1, 2].map(|i| self.c[i].resample(target)), tangential: self.tangential }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_and_diff_basics() {
        for n1 in [8, 9, 16, 33] {
            let g = ChannelGrid::new(n1, 2).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "n1={n1} sum={s}");
            assert!(g.weights().iter().all(|&w| w > 0.0));
            let d = g.diff1();
            for i in 0..n1 {
                let row: f64 = d[i * n1..(i + 1) * n1].iter().sum();
                assert!(row.abs() < 1e-12);
            }
            assert_eq!(g.x1()[0], 0.0);
            assert_eq!(g.x1()[n1 - 1], 1.0);
        }
        assert!(ChannelGrid::new(4, 2).is_err());
    }

    #[test]
    fn padded_size_is_smooth() {
        assert_eq!(smooth_size(25), 25);
        assert_eq!(smooth_size(49), 50);
        assert_eq!(smooth_size(7), 8);
    }

    #[test]
    fn hermitize_is_idempotent() {
        let mut c: Vec<C64> = (0..9).map(|k| C64::new(k as f64, (k * k) as f64)).collect();
        hermitize(3, &mut c);
        let before = c.clone();
        hermitize(3, &mut c);
        assert_eq!(before, c);
        assert_eq!(c[4].im, 0.0);
    }
}
