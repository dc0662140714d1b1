//! Gas constants, transport laws, the coupling constant `cal_r` and the
//! admissibility check on the slip coefficients.

use nalgebra::{Matrix6, SymmetricEigen};

use crate::error::{Error, Result};

/// Which transport law to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coefficient {
    Viscosity,
    Conductivity,
}

/// Raw physical inputs. Field names follow the usual notation:
/// `a_u1, a_u2, a_t1, a_t2` are the velocity/temperature slip coefficients
/// of first and second kind.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamsSpec {
    pub gas_constant: f64,
    pub adiabatic: f64,
    pub mu0: f64,
    pub kappa0: f64,
    pub gamma: f64,
    pub a_u1: f64,
    pub a_u2: f64,
    pub a_t1: f64,
    pub a_t2: f64,
    pub rho_bar: f64,
    pub theta_bar: f64,
}

impl Default for ParamsSpec {
    /// Unit gas with small second-kind velocity and first-kind temperature
    /// slip: the regime where the admissibility check succeeds.
    fn default() -> Self {
        ParamsSpec {
            gas_constant: 1.0,
            adiabatic: 5.0 / 3.0,
            mu0: 1.0,
            kappa0: 1.0,
            gamma: 1.0,
            a_u1: 1.0,
            a_u2: 0.05,
            a_t1: 0.05,
            a_t2: 1.0,
            rho_bar: 1.0,
            theta_bar: 1.0,
        }
    }
}

/// Validated parameters together with derived constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    spec: ParamsSpec,
    c_v: f64,
    cal_r: f64,
}

impl Params {
    pub fn new(spec: ParamsSpec) -> Result<Self> {
        let positive = [
            ("gas_constant", spec.gas_constant),
            ("mu0", spec.mu0),
            ("kappa0", spec.kappa0),
            ("a_u1", spec.a_u1),
            ("a_u2", spec.a_u2),
            ("a_t1", spec.a_t1),
            ("a_t2", spec.a_t2),
            ("rho_bar", spec.rho_bar),
            ("theta_bar", spec.theta_bar),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(spec.adiabatic > 1.0 && spec.adiabatic.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "adiabatic must exceed 1, got {}",
                spec.adiabatic
            )));
        }
        if !(spec.gamma > -3.0 && spec.gamma <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must lie in (-3, 1], got {}",
                spec.gamma
            )));
        }
        let c_v = spec.gas_constant / (spec.adiabatic - 1.0);
        let mut p = Params { spec, c_v, cal_r: 0.0 };
        p.cal_r = compute_cal_r(&p);
        Ok(p)
    }

    pub fn spec(&self) -> &ParamsSpec {
        &self.spec
    }
    pub fn r(&self) -> f64 {
        self.spec.gas_constant
    }
    pub fn c_v(&self) -> f64 {
        self.c_v
    }
    pub fn rho_bar(&self) -> f64 {
        self.spec.rho_bar
    }
    pub fn theta_bar(&self) -> f64 {
        self.spec.theta_bar
    }
    pub fn cal_r(&self) -> f64 {
        self.cal_r
    }
    pub fn a_u1(&self) -> f64 {
        self.spec.a_u1
    }
    pub fn a_u2(&self) -> f64 {
        self.spec.a_u2
    }
    pub fn a_t1(&self) -> f64 {
        self.spec.a_t1
    }
    pub fn a_t2(&self) -> f64 {
        self.spec.a_t2
    }

    /// Exponent `s = 1 - gamma/2` of the power laws.
    pub fn law_exponent(&self) -> f64 {
        1.0 - 0.5 * self.spec.gamma
    }

    /// `mu(theta)` without the positivity check, for hot loops.
    #[inline]
    pub fn mu(&self, theta: f64) -> f64 {
        self.spec.mu0 * theta.powf(self.law_exponent())
    }

    #[inline]
    pub fn kappa(&self, theta: f64) -> f64 {
        self.spec.kappa0 * theta.powf(self.law_exponent())
    }

    pub fn mu_bar(&self) -> f64 {
        self.mu(self.spec.theta_bar)
    }

    pub fn kappa_bar(&self) -> f64 {
        self.kappa(self.spec.theta_bar)
    }

    /// Both sides of the relation that defines `cal_r`, evaluated at `cal_r`.
    pub fn cal_r_balance(&self, cal_r: f64) -> (f64, f64) {
        let r = self.r();
        let (rho, th) = (self.rho_bar(), self.theta_bar());
        let s2r = (2.0 / r).sqrt();
        let (mu, ka) = (self.mu_bar(), self.kappa_bar());
        let lhs = r * rho * s2r * (2.0 / (3.0 * r)) * self.a_u1() * self.a_u2() * mu * mu / th.sqrt();
        let rhs = r
            * (rho * th + cal_r * rho)
            * (32.0 / (75.0 * r * r))
            * s2r
            * self.a_t1()
            * self.a_t2()
            * mu
            * ka
            / (th * th.sqrt());
        (lhs, rhs)
    }
}

/// `mu0 theta^(1-gamma/2)` or `kappa0 theta^(1-gamma/2)`.
pub fn transport_coefficient(kind: Coefficient, theta: f64, params: &Params) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {theta}")));
    }
    Ok(match kind {
        Coefficient::Viscosity => params.mu(theta),
        Coefficient::Conductivity => params.kappa(theta),
    })
}

/// Closed-form solution of the balance relation for `cal_r`.
pub fn compute_cal_r(params: &Params) -> f64 {
    let r = params.r();
    let th = params.theta_bar();
    25.0 * r / 16.0 * params.a_u1() * params.a_u2() * params.mu_bar() * th
        / (params.a_t1() * params.a_t2() * params.kappa_bar())
        - th
}

/// Left side of the scalar admissibility condition.
pub fn condition1(params: &Params) -> f64 {
    let r = params.r();
    let base = params.a_t1() * params.kappa_bar() / params.theta_bar() * params.rho_bar();
    16.0 / (15.0 * r) * base - 2.0 / (5.0 * r) * params.a_u2() * base
}

/// The 6x6 matrix whose positive definiteness is required for some
/// `lambda0, lambda1 > 0`.
pub fn assumption_matrix(params: &Params, lambda0: f64, lambda1: f64) -> Matrix6<f64> {
    let r = params.r();
    let th = params.theta_bar();
    let rho = params.rho_bar();
    let (mu, ka) = (params.mu_bar(), params.kappa_bar());
    let s2r = (2.0 / r).sqrt();
    let (au1, au2, at1, at2) = (params.a_u1(), params.a_u2(), params.a_t1(), params.a_t2());

    let cross = 0.5 * r * (4.0 / (5.0 * r * r)) * au2 * at1 * ka;
    let vel = (2.0 / (3.0 * r)) * s2r * au1 * au2 * mu * mu / th.sqrt();
    let mix = (2.0 / (5.0 * r * r)) * au2 * at1 * ka / th;
    let heat = (32.0 / (75.0 * r * r)) * s2r * at1 * at2 * ka * ka / (th * th.sqrt());

    let mut m = Matrix6::zeros();
    m[(0, 0)] = r * th;
    m[(0, 2)] = 0.5 * r * rho + lambda0 * cross;
    m[(0, 3)] = lambda0 * cross;
    m[(0, 4)] = 0.5 * mu;
    m[(0, 5)] = lambda1 * cross;
    m[(1, 1)] = lambda0 * vel;
    m[(1, 2)] = lambda0 * mix;
    m[(2, 2)] = lambda0 * heat;
    m[(3, 3)] = lambda0 * (16.0 / (15.0 * r)) * at1 * ka * rho / th;
    m[(4, 4)] = lambda1 * vel;
    m[(4, 5)] = lambda1 * mix;
    m[(5, 5)] = lambda1 * heat;
    for i in 0..6 {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

/// Smallest eigenvalue and the definiteness verdict with the relative
/// threshold `1e-12 * |M|` (spectral norm).
pub fn definiteness(m: &Matrix6<f64>) -> (f64, bool) {
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let min = eig.min();
    let scale = eig.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    (min, min > 1e-12 * scale)
}

/// Candidate values for `lambda0` and `lambda1`; the scan visits the
/// Cartesian product with `lambda0` varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaGrid {
    pub lambda0: Vec<f64>,
    pub lambda1: Vec<f64>,
}

impl LambdaGrid {
    pub fn square(values: &[f64]) -> Self {
        LambdaGrid { lambda0: values.to_vec(), lambda1: values.to_vec() }
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        let v: Vec<f64> = (-8..=8).map(|k| 2f64.powi(k)).collect();
        LambdaGrid::square(&v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub condition1_value: f64,
    pub condition1_holds: bool,
    /// First passing pair in scan order.
    pub lambda: Option<(f64, f64)>,
    /// Smallest eigenvalue at the first passing pair, or the largest
    /// smallest-eigenvalue seen over the scan when no pair passes.
    pub min_eigenvalue: f64,
    pub passing: Vec<(f64, f64)>,
    pub admissible: bool,
}

pub fn check_assumption(params: &Params, grid: &LambdaGrid) -> Result<AssumptionReport> {
    let all = grid.lambda0.iter().chain(grid.lambda1.iter());
    if grid.lambda0.is_empty() || grid.lambda1.is_empty() {
        return Err(Error::InvalidParams("lambda grid is empty".into()));
    }
    if let Some(bad) = all.clone().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParams(format!("lambda values must be positive, got {bad}")));
    }
    let c1 = condition1(params);
    let mut first: Option<((f64, f64), f64)> = None;
    let mut best = f64::NEG_INFINITY;
    let mut passing = Vec::new();
    for &l0 in &grid.lambda0 {
        for &l1 in &grid.lambda1 {
            let (min, ok) = definiteness(&assumption_matrix(params, l0, l1));
            best = best.max(min);
            if ok {
                passing.push((l0, l1));
                if first.is_none() {
                    first = Some(((l0, l1), min));
                }
            }
        }
    }
    let condition1_holds = c1 > 0.0;
    Ok(AssumptionReport {
        condition1_value: c1,
        condition1_holds,
        lambda: first.map(|f| f.0),
        min_eigenvalue: first.map_or(best, |f| f.1),
        admissible: condition1_holds && first.is_some(),
        passing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(a_u1: f64, a_u2: f64, a_t1: f64, a_t2: f64) -> Params {
        Params::new(ParamsSpec { a_u1, a_u2, a_t1, a_t2, ..ParamsSpec::default() }).unwrap()
    }

    #[test]
    fn power_law_values() {
        let mut s = ParamsSpec { gamma: 1.0, ..ParamsSpec::default() };
        let p = Params::new(s.clone()).unwrap();
        assert_eq!(transport_coefficient(Coefficient::Viscosity, 1.0, &p).unwrap(), 1.0);
        s.mu0 = 2.0;
        let p = Params::new(s.clone()).unwrap();
        let v = transport_coefficient(Coefficient::Viscosity, 4.0, &p).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
        s.kappa0 = 3.0;
        s.gamma = -3.0 + 1e-12;
        let p = Params::new(s).unwrap();
        let v = transport_coefficient(Coefficient::Conductivity, 1.0, &p).unwrap();
        assert!((v - 3.0).abs() < 1e-14);
        assert!(transport_coefficient(Coefficient::Viscosity, 0.0, &p).is_err());
    }

    #[test]
    fn cal_r_examples() {
        let p = unit(1.0, 0.1, 0.1, 1.0);
        assert!((p.cal_r() - 0.5625).abs() < 1e-14);
        let p = unit(4.0, 4.0, 5.0, 5.0);
        assert!(p.cal_r().abs() < 1e-14);
        let (l, r) = p.cal_r_balance(p.cal_r());
        assert!((l - r).abs() <= 1e-12 * l.abs());
    }

    #[test]
    fn matrix_entries() {
        let p = unit(1.0, 0.05, 0.05, 1.0);
        let m = assumption_matrix(&p, 1.0, 1.0);
        assert_eq!(m[(0, 0)], 1.0);
        assert!((m[(3, 3)] - 16.0 / 15.0 * 0.05).abs() < 1e-15);
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn condition1_threshold() {
        let p = unit(1.0, 3.0, 0.05, 1.0);
        let rep = check_assumption(&p, &LambdaGrid::default()).unwrap();
        assert!(!rep.condition1_holds);
        assert!(!rep.admissible);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = ParamsSpec { adiabatic: 1.0, ..ParamsSpec::default() };
        assert!(Params::new(s).is_err());
        let s = ParamsSpec { a_t2: 0.0, ..ParamsSpec::default() };
        assert!(Params::new(s).is_err());
        let s = ParamsSpec { gamma: -3.0, ..ParamsSpec::default() };
        assert!(Params::new(s).is_err());
    }
}
