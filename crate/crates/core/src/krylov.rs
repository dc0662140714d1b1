//! Restarted, right-preconditioned GMRES on complex vectors.

use rustfft::num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOptions {
    /// Relative residual target `|b - A x| <= tol |b|`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-10, restart: 40, max_iter: 400 }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// Final relative residual (true residual, recomputed at the end).
    pub residual: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn residual(apply: &impl Fn(&[C64]) -> Vec<C64>, b: &[C64], x: &[C64]) -> Vec<C64> {
    let ax = apply(x);
    b.iter().zip(&ax).map(|(p, q)| p - q).collect()
}

pub fn gmres(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    precond: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    x0: Vec<C64>,
    opts: &GmresOptions,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return GmresOutcome { x: vec![C64::new(0.0, 0.0); n], iterations: 0, residual: 0.0, history: vec![0.0], converged: true };
    }
    let mut x = x0;
    let mut history = Vec::new();
    let mut total = 0;
    let m = opts.restart.max(1);
    loop {
        let r = residual(&apply, b, &x);
        let beta = norm(&r);
        history.push(beta / bnorm);
        if beta <= opts.tol * bnorm || total >= opts.max_iter {
            return GmresOutcome {
                x,
                iterations: total,
                residual: beta / bnorm,
                converged: beta <= opts.tol * bnorm,
                history,
            };
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|c| c / beta).collect());
        let mut hess = vec![vec![C64::new(0.0, 0.0); m]; m + 1];
        let mut rot: Vec<(f64, C64)> = Vec::with_capacity(m);
        let mut g = vec![C64::new(0.0, 0.0); m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k = 0;
        let mut stalled = false;
        for j in 0..m {
            let mut w = apply(&precond(&basis[j]));
            for _pass in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(v, &w);
                    hess[i][j] += hij;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
                }
            }
            let hnext = norm(&w);
            hess[j + 1][j] = C64::new(hnext, 0.0);
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a, bb) = (hess[i][j], hess[i + 1][j]);
                hess[i][j] = a * c + s * bb;
                hess[i + 1][j] = -s.conj() * a + bb * c;
            }
            let (a, bb) = (hess[j][j], hess[j + 1][j]);
            let rr = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if a.norm() == 0.0 {
                (0.0, C64::new(1.0, 0.0))
            } else {
                (a.norm() / rr, a / a.norm() * bb.conj() / rr)
            };
            rot.push((c, s));
            hess[j][j] = a * c + s * bb;
            hess[j + 1][j] = C64::new(0.0, 0.0);
            let gj = g[j];
            g[j] = gj * c;
            g[j + 1] = -s.conj() * gj;
            total += 1;
            k = j + 1;
            let est = g[j + 1].norm();
            history.push(est / bnorm);
            if hnext == 0.0 {
                stalled = true;
            } else {
                basis.push(w.iter().map(|c| c / hnext).collect());
            }
            if est <= opts.tol * bnorm || stalled || total >= opts.max_iter {
                break;
            }
        }
        // Back substitution for the k x k triangular system.
        let mut y = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for l in i + 1..k {
                acc -= hess[i][l] * y[l];
            }
            y[i] = acc / hess[i][i];
        }
        let mut comb = vec![C64::new(0.0, 0.0); n];
        for (yi, v) in y.iter().zip(&basis) {
            comb.iter_mut().zip(v).for_each(|(c, vi)| *c += yi * vi);
        }
        let dx = precond(&comb);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    }
}
