#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use slipflow::{ChannelGrid, Complex64, ParamsSpec, ScalarField, VectorField};

/// Gauss-Legendre nodes and weights on [0,1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs.push(0.5 * (1.0 - x));
        ws.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

/// Cyclic Jacobi rotations; returns the eigenvalues of a symmetric matrix.
pub fn jacobi_eigenvalues(mut a: [[f64; 6]; 6]) -> Vec<f64> {
    for _ in 0..100 {
        let off: f64 = (0..6).flat_map(|i| (0..6).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..6 {
            for q in p + 1..6 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..6 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..6 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..6).map(|i| a[i][i]).collect()
}

/// Entries typed in directly from the assumption, 1-based as printed.
pub fn oracle_matrix(p: &ParamsSpec, l0: f64, l1: f64) -> [[f64; 6]; 6] {
    let r = p.gas_constant;
    let s = 1.0 - p.gamma / 2.0;
    let mu = p.mu0 * p.theta_bar.powf(s);
    let ka = p.kappa0 * p.theta_bar.powf(s);
    let (th, rho) = (p.theta_bar, p.rho_bar);
    let mut m = [[0.0; 6]; 6];
    let mut set = |i: usize, j: usize, v: f64| {
        m[i - 1][j - 1] = v;
        m[j - 1][i - 1] = v;
    };
    set(1, 1, r * th);
    set(1, 3, r * rho / 2.0 + l0 / 2.0 * r * 4.0 / (5.0 * r * r) * p.a_u2 * p.a_t1 * ka);
    set(1, 4, l0 / 2.0 * r * 4.0 / (5.0 * r * r) * p.a_u2 * p.a_t1 * ka);
    set(1, 5, mu / 2.0);
    set(1, 6, l1 / 2.0 * r * 4.0 / (5.0 * r * r) * p.a_u2 * p.a_t1 * ka);
    set(2, 2, l0 * 2.0 / (3.0 * r) * (2.0 / r).sqrt() * p.a_u1 * p.a_u2 * mu * mu / th.sqrt());
    set(2, 3, l0 * 2.0 / (5.0 * r * r) * p.a_u2 * p.a_t1 * ka / th);
    set(3, 3, l0 * 32.0 / (75.0 * r * r) * (2.0 / r).sqrt() * p.a_t1 * p.a_t2 * ka * ka / (th * th.sqrt()));
    set(4, 4, l0 * 16.0 / (15.0 * r) * p.a_t1 * ka / th * rho);
    set(5, 5, l1 * 2.0 / (3.0 * r) * (2.0 / r).sqrt() * p.a_u1 * p.a_u2 * mu * mu / th.sqrt());
    set(5, 6, l1 * 2.0 / (5.0 * r * r) * p.a_u2 * p.a_t1 * ka / th);
    set(6, 6, l1 * 32.0 / (75.0 * r * r) * (2.0 / r).sqrt() * p.a_t1 * p.a_t2 * ka * ka / (th * th.sqrt()));
    m
}

/// Pairing by a brute-force Fourier sum over |m2|, |m3| <= mmax.
pub fn pairing_oracle(a: impl Fn(f64, f64) -> f64, b: impl Fn(f64, f64) -> f64, mmax: i64) -> f64 {
    let q = 32;
    let coef = |f: &dyn Fn(f64, f64) -> f64, m2: i64, m3: i64| {
        let mut c = Complex64::new(0.0, 0.0);
        for i in 0..q {
            for j in 0..q {
                let (x2, x3) = (i as f64 / q as f64, j as f64 / q as f64);
                let ph = -2.0 * PI * (m2 as f64 * x2 + m3 as f64 * x3);
                c += Complex64::new(ph.cos(), ph.sin()) * f(x2, x3);
            }
        }
        c / (q * q) as f64
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for m2 in -mmax..=mmax {
        for m3 in -mmax..=mmax {
            let sym = Complex64::new(0.0, 2.0 * PI * (m2 + m3) as f64);
            acc += sym * coef(&a, m2, m3).conj() * coef(&b, m2, m3);
        }
    }
    acc.re
}


/// Zero mean with vanishing normal derivative at both faces.
pub fn phi_star(g: &Arc<ChannelGrid>) -> ScalarField {
    ScalarField::from_fn(g, |x1, x2, x3| {
        0.3 * (PI * x1).cos() + 0.2 * (2.0 * PI * x1).cos() * (2.0 * PI * x2).sin() + 0.1 * (2.0 * PI * (x2 - x3)).cos()
    })
}

/// Tangential flow with max |div u| of 1/2.
pub fn flow(g: &Arc<ChannelGrid>) -> VectorField {
    let u = VectorField::new([
        ScalarField::from_fn(g, |x1, _, x3| 0.5 * x1 * (1.0 - x1) * (2.0 * PI * x3).sin()),
        ScalarField::from_fn(g, |x1, x2, _| 0.2 * (1.0 + x1) * (2.0 * PI * x2).cos()),
        ScalarField::from_fn(g, |x1, _, _| 0.1 * x1 * x1),
    ])
    .into_tangential(1e-14)
    .unwrap();
    let d = u.divergence().to_physical();
    u.scale(0.5 / d.max().abs().max(d.min().abs()))
}

pub fn manufactured_h(g: &Arc<ChannelGrid>, h: f64) -> ScalarField {
    let (phi, u) = (phi_star(g), flow(g));
    let mut div = ScalarField::zeros(g);
    for b in 0..3 {
        div = div.add(&phi.mul(&u.c[b]).derivative(b + 1));
    }
    phi.axpy(h, &div)
}
