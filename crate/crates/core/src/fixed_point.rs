//! The solution operator `T(phi', u', zeta') = (phi, u, zeta)` and its
//! fixed-point iteration.

use std::sync::Arc;

use crate::boundary::{extend_wall_temperature, make_wall_temperature, BoundaryTemperature, ExtendedTemperature, WallRecipe};
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, ScalarField, VectorField};
use crate::inequality::{pde_residuals, ResidualRecord};
use crate::krylov::GmresOptions;
use crate::linearized::LinearizedSetup;
use crate::nonlinear::{compute_h, norm_n, State};
use crate::params::Params;
use crate::transport::{laplacian_scale, TransportSolver};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    /// Time-step-like parameter of the discretized transport equation.
    pub h: f64,
    /// Regularization schedule as multiples of [`laplacian_scale`]; the last
    /// entry is used by the solution operator.
    pub k_reg: Vec<f64>,
    pub tol_linear: f64,
    pub tol_fp: f64,
    pub max_iter: usize,
    /// Number of times `h` may be halved after divergence.
    pub retry_budget: usize,
    /// Bound on `N_2` of the input state.
    pub ball_radius: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            h: 1.0,
            k_reg: vec![1e4, 1e6, 1e8],
            tol_linear: 1e-10,
            tol_fp: 1e-9,
            max_iter: 200,
            retry_budget: 4,
            ball_radius: 1e3,
            gmres_restart: 40,
            gmres_max_iter: 400,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.into()));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h must be positive");
        }
        if self.k_reg.is_empty() || self.k_reg.iter().any(|k| !(*k > 0.0)) {
            return bad("k_reg schedule must be nonempty and positive");
        }
        if self.k_reg.windows(2).any(|w| w[1] <= w[0]) {
            return bad("k_reg schedule must be increasing");
        }
        if !(self.tol_linear > 0.0 && self.tol_fp > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_iter == 0 || self.gmres_restart == 0 || self.gmres_max_iter == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.ball_radius > 0.0) {
            return bad("ball radius must be positive");
        }
        Ok(())
    }

    fn gmres(&self) -> GmresOptions {
        GmresOptions { tol: self.tol_linear, restart: self.gmres_restart, max_iter: self.gmres_max_iter }
    }
}

/// Everything that stays fixed across iterations of one run.
pub struct ChannelProblem {
    pub params: Params,
    pub wall: BoundaryTemperature,
    pub ext: ExtendedTemperature,
    pub k_reg: f64,
    setup: LinearizedSetup,
    transport: TransportSolver,
}

impl ChannelProblem {
    pub fn new(grid: &Arc<ChannelGrid>, params: &Params, recipe: &WallRecipe, settings: &SolverSettings) -> Result<Self> {
        settings.validate()?;
        let wall = make_wall_temperature(recipe, grid)?;
        Self::from_wall(grid, params, wall, settings)
    }

    pub fn from_wall(
        grid: &Arc<ChannelGrid>,
        params: &Params,
        wall: BoundaryTemperature,
        settings: &SolverSettings,
    ) -> Result<Self> {
        let ext = extend_wall_temperature(&wall, grid);
        let setup = LinearizedSetup::new(grid, params, &wall, &ext)?;
        let k_reg = settings.k_reg.last().copied().unwrap_or(1e8) * laplacian_scale(grid);
        let transport = TransportSolver::new(grid, k_reg)?;
        Ok(ChannelProblem { params: params.clone(), wall, ext, k_reg, setup, transport })
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        self.setup.grid()
    }

    pub fn setup(&self) -> &LinearizedSetup {
        &self.setup
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub linear_iterations: usize,
    pub weak_residual: f64,
}

/// One application of the solution operator.
pub fn apply_t(problem: &ChannelProblem, prev: &State, h: f64, settings: &SolverSettings) -> Result<(State, StepInfo)> {
    let n2 = norm_n(prev, 2);
    if n2 > settings.ball_radius {
        return Err(Error::Divergence(format!(
            "N2 = {n2:.3e} left the ball of radius {:.3e}",
            settings.ball_radius
        )));
    }
    let lp = problem.setup.assemble(prev)?;
    let sol = lp.solve(&settings.gmres(), Some((&prev.u, &prev.zeta)))?;
    let hfield = compute_h(&prev.phi, &sol.u, h, &problem.params);
    let phi = problem.transport.solve(&sol.u, &hfield, h, settings.tol_linear, Some(&prev.phi))?;
    let info = StepInfo { linear_iterations: sol.iterations, weak_residual: sol.residual };
    Ok((State { phi, u: sol.u, zeta: sol.zeta }, info))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|phi - phi'|_{L2} + |u - u'|_{H1} + |zeta - zeta'|_{H1}`.
    pub difference: f64,
    pub n1: f64,
    pub n2: f64,
    pub mass_defect: f64,
    pub weak_residual: f64,
    pub linear_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    pub records: Vec<IterationRecord>,
    pub final_state: State,
    pub rho: ScalarField,
    pub theta: ScalarField,
    pub converged: bool,
    pub h_used: f64,
    pub k_reg_used: f64,
    pub restarts: usize,
    pub n1: usize,
    pub m: usize,
    /// Strong-form residuals of the nonlinear system at the last iterate.
    pub residuals: Option<ResidualRecord>,
    /// Relative residual of the heat equation with the coupling constant
    /// removed, evaluated at the last iterate.
    pub heat_residual: Option<f64>,
}

impl SolveReport {
    pub fn differences(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.difference).collect()
    }

    pub fn contraction(&self) -> Option<f64> {
        contraction_ratio(&self.differences())
    }

    pub fn velocity(&self) -> &VectorField {
        &self.final_state.u
    }

    /// `|rho - rho_bar|_{H2} + |u|_{H3} + |theta - theta_bar|_{H3}`.
    pub fn solution_size(&self, params: &Params) -> f64 {
        let mut dt = self.theta.clone();
        dt.add_constant(-params.theta_bar());
        self.final_state.phi.sobolev_norm(2) + self.final_state.u.sobolev_norm(3) + dt.sobolev_norm(3)
    }
}

/// Largest ratio of successive entries; `None` for fewer than two entries.
/// Zero entries after a zero entry count as ratio 0.
pub fn contraction_ratio(history: &[f64]) -> Option<f64> {
    if history.len() < 2 {
        return None;
    }
    let r = history
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else if w[1] > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max);
    Some(r)
}

fn retryable(e: &Error) -> bool {
    matches!(e, Error::Domain(_) | Error::Divergence(_))
}

/// Iterates the solution operator from the zero state.
///
/// Three consecutive growths of the difference norm, a positivity failure or
/// leaving the ball halve `h` and restart, up to `retry_budget` times.
/// Reaching `max_iter` is not an error; the report has `converged = false`.
pub fn iterate(problem: &ChannelProblem, settings: &SolverSettings) -> Result<SolveReport> {
    settings.validate()?;
    let grid = problem.grid().clone();
    let mut h = settings.h;
    let mut restarts = 0;
    let mut failures: Vec<f64> = Vec::new();
    'restart: loop {
        let mut state = State::zeros(&grid);
        let mut records: Vec<IterationRecord> = Vec::new();
        let mut growth = 0;
        let mut converged = false;
        for it in 1..=settings.max_iter {
            let step = apply_t(problem, &state, h, settings);
            let (next, info) = match step {
                Ok(v) => v,
                Err(e) if retryable(&e) && restarts < settings.retry_budget => {
                    failures.push(h);
                    h *= 0.5;
                    restarts += 1;
                    continue 'restart;
                }
                Err(Error::Domain(msg)) | Err(Error::Divergence(msg)) => {
                    return Err(Error::Divergence(format!(
                        "{msg} (after halving h {restarts} times, h tried: {failures:?})"
                    )))
                }
                Err(e) => return Err(e),
            };
            let difference = next.difference_norm(&state);
            let rec = IterationRecord {
                iteration: it,
                difference,
                n1: norm_n(&next, 1),
                n2: norm_n(&next, 2),
                mass_defect: next.phi.integrate().abs(),
                weak_residual: info.weak_residual,
                linear_iterations: info.linear_iterations,
            };
            if records.last().is_some_and(|p: &IterationRecord| difference > p.difference) {
                growth += 1;
            } else {
                growth = 0;
            }
            records.push(rec);
            state = next;
            if difference <= settings.tol_fp {
                converged = true;
                break;
            }
            if growth >= 3 {
                if restarts < settings.retry_budget {
                    failures.push(h);
                    h *= 0.5;
                    restarts += 1;
                    continue 'restart;
                }
                return Err(Error::Divergence(format!(
                    "difference norm grew three times in a row; history {:?}",
                    records.iter().map(|r| r.difference).collect::<Vec<_>>()
                )));
            }
        }
        return finish(problem, state, records, converged, h, restarts);
    }
}

fn finish(
    problem: &ChannelProblem,
    state: State,
    records: Vec<IterationRecord>,
    converged: bool,
    h: f64,
    restarts: usize,
) -> Result<SolveReport> {
    let params = &problem.params;
    let mut rho = state.phi.clone();
    rho.add_constant(params.rho_bar());
    let theta = problem.ext.tilde.add(&state.zeta);
    let residuals = pde_residuals(&rho, &state.u, &theta, params, &problem.wall).ok();
    let plain = problem.setup.without_cal_r(&problem.wall)?;
    let heat_residual = plain.assemble(&state).ok().map(|lp| lp.heat_residual_norm(&state.u, &state.zeta));
    let grid = problem.grid();
    Ok(SolveReport {
        iterations: records.len(),
        records,
        rho,
        theta,
        converged,
        h_used: h,
        k_reg_used: problem.k_reg,
        restarts,
        n1: grid.n1(),
        m: grid.m(),
        residuals,
        heat_residual,
        final_state: state,
    })
}
