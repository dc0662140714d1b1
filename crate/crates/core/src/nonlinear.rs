//! Perturbation sources, the viscous stress and the smallness norms.

use std::sync::Arc;

use crate::boundary::ExtendedTemperature;
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, ScalarField, VectorField};
use crate::params::Params;

/// Perturbation triple `(phi, u, zeta) = (rho - rho_bar, u, theta - ext)`.
#[derive(Clone, Debug)]
pub struct State {
    pub phi: ScalarField,
    pub u: VectorField,
    pub zeta: ScalarField,
}

impl State {
    pub fn zeros(grid: &Arc<ChannelGrid>) -> Self {
        State { phi: ScalarField::zeros(grid), u: VectorField::zeros(grid), zeta: ScalarField::zeros(grid) }
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        self.phi.grid()
    }

    pub fn scale(&self, s: f64) -> State {
        State { phi: self.phi.scale(s), u: self.u.scale(s), zeta: self.zeta.scale(s) }
    }

    /// `|phi|_{L2} + |u|_{H1} + |zeta|_{H1}` of `self - other`.
    pub fn difference_norm(&self, other: &State) -> f64 {
        self.phi.sub(&other.phi).l2_norm()
            + self.u.sub(&other.u).sobolev_norm(1)
            + self.zeta.sub(&other.zeta).sobolev_norm(1)
    }

    pub fn resample(&self, target: &Arc<ChannelGrid>) -> State {
        State { phi: self.phi.resample(target), u: self.u.resample(target), zeta: self.zeta.resample(target) }
    }
}

/// `N_k = |phi|_{H^k} + |u|_{H^{k+1}} + |zeta|_{H^{k+1}}`.
pub fn norm_n(state: &State, k: usize) -> f64 {
    state.phi.sobolev_norm(k) + state.u.sobolev_norm(k + 1) + state.zeta.sobolev_norm(k + 1)
}

/// `grad u + grad u^T - (2/3) div u I`, indexed `[a][b]`.
pub fn deviatoric(grad: &[[ScalarField; 3]; 3]) -> [[ScalarField; 3]; 3] {
    let div = grad[0][0].add(&grad[1][1]).add(&grad[2][2]);
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let s = grad[a][b].add(&grad[b][a]);
            if a == b {
                s.axpy(-2.0 / 3.0, &div)
            } else {
                s
            }
        })
    })
}

fn positive_map(theta: &ScalarField, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
    let phys = theta.to_physical();
    let lo = phys.min();
    if !(lo > 0.0) {
        return Err(Error::Domain(format!("temperature must stay positive, min {lo:.3e}")));
    }
    Ok(phys.map(f).to_spectral())
}

/// `mu(theta) (grad u + grad u^T - (2/3) div u I)`.
pub fn stress_tensor(u: &VectorField, theta: &ScalarField, params: &Params) -> Result<[[ScalarField; 3]; 3]> {
    let mu = positive_map(theta, |t| params.mu(t))?;
    let d = deviatoric(&u.gradient());
    Ok(d.map(|row| row.map(|e| mu.mul(&e))))
}

/// `div T` for a tensor field `T[a][b]`, contracting the second index.
pub fn tensor_divergence(t: &[[ScalarField; 3]; 3]) -> [ScalarField; 3] {
    std::array::from_fn(|a| t[a][0].derivative(1).add(&t[a][1].derivative(2)).add(&t[a][2].derivative(3)))
}

/// `sum_b w_b d_b f`.
pub fn advect(w: &VectorField, grad: &[ScalarField; 3]) -> ScalarField {
    w.c[0].mul(&grad[0]).add(&w.c[1].mul(&grad[1])).add(&w.c[2].mul(&grad[2]))
}

/// Momentum source of the perturbation system.
pub fn compute_f(state: &State, ext: &ExtendedTemperature, params: &Params) -> Result<VectorField> {
    let (r, rho) = (params.r(), params.rho_bar());
    let State { phi, u, zeta } = state;
    let tt = &ext.tilde;
    let theta = tt.add(zeta);
    let dmu = positive_map(&theta, |t| params.mu(t) - params.mu_bar())?;
    let grad_u = u.gradient();
    let dev = deviatoric(&grad_u);
    let visc = tensor_divergence(&dev.map(|row| row.map(|e| dmu.mul(&e))));
    let gz = zeta.gradient();
    let gt = tt.gradient();
    let gp = phi.gradient();
    let mut tt_dev = tt.clone();
    tt_dev.add_constant(-params.theta_bar());
    let c = std::array::from_fn(|a| {
        let conv = advect(u, &grad_u[a]);
        let mut f = phi.mul(&conv).scale(-1.0);
        f = f.axpy(-rho, &conv);
        f = f.axpy(-r, &phi.mul(&gz[a]));
        f = f.axpy(-r, &phi.mul(&gt[a]));
        f = f.axpy(-r * rho, &gt[a]);
        f = f.axpy(-r, &zeta.mul(&gp[a]));
        f = f.axpy(-r, &tt_dev.mul(&gp[a]));
        f.add(&visc[a])
    });
    Ok(VectorField::new(c))
}

/// Energy source of the perturbation system; `kappa` and the stress use the
/// total temperature `ext + zeta`.
pub fn compute_g(state: &State, ext: &ExtendedTemperature, params: &Params) -> Result<ScalarField> {
    let (r, rho, cv) = (params.r(), params.rho_bar(), params.c_v());
    let State { phi, u, zeta } = state;
    let tt = &ext.tilde;
    let theta = tt.add(zeta);
    let kappa = positive_map(&theta, |t| params.kappa(t))?;
    let dkappa = positive_map(&theta, |t| params.kappa(t) - params.kappa_bar())?;
    let gz = zeta.gradient();
    let gt = tt.gradient();
    let div = u.divergence();
    let u_gz = advect(u, &gz);
    let u_gt = advect(u, &gt);
    let mut tt_dev = tt.clone();
    tt_dev.add_constant(-params.theta_bar());

    let mut g = phi.mul(&u_gz).scale(-cv);
    g = g.axpy(-cv * rho, &u_gz);
    g = g.axpy(-cv, &phi.mul(&u_gt));
    g = g.axpy(-cv * rho, &u_gt);
    g = g.axpy(-r, &phi.mul(&zeta.mul(&div)));
    g = g.axpy(-r * rho, &zeta.mul(&div));
    g = g.axpy(-r, &phi.mul(&tt.mul(&div)));
    g = g.axpy(-r * rho, &tt_dev.mul(&div));
    let flux1: [ScalarField; 3] = std::array::from_fn(|b| dkappa.mul(&gz[b]));
    let flux2: [ScalarField; 3] = std::array::from_fn(|b| kappa.mul(&gt[b]));
    for b in 0..3 {
        g = g.add(&flux1[b].derivative(b + 1)).add(&flux2[b].derivative(b + 1));
    }
    let stress = stress_tensor(u, &theta, params)?;
    let grad_u = u.gradient();
    for a in 0..3 {
        for b in 0..3 {
            g = g.add(&grad_u[a][b].mul(&stress[a][b]));
        }
    }
    Ok(g)
}

/// `phi' - h rho_bar div u`.
pub fn compute_h(phi_prev: &ScalarField, u: &VectorField, h: f64, params: &Params) -> ScalarField {
    phi_prev.axpy(-h * params.rho_bar(), &u.divergence())
}
