//! The five batch commands. Each writes `<out>/<command>.txt` even when the
//! run fails.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fixed_point::{iterate, ChannelProblem, SolveReport};
use crate::grid::{ChannelGrid, VectorField};
use crate::inequality::{korn_suite, pde_residuals, poincare_trace_suite, poincare_zero_mean_suite, ResidualRecord};
use crate::params::{check_assumption, LambdaGrid, Params};
use crate::par::with_threads;
use crate::report::{read_field_csv, write_field_csv, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckAssumption,
    Solve,
    Verify,
    Residuals,
    SweepEpsilon,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::CheckAssumption, Command::Solve, Command::Verify, Command::Residuals, Command::SweepEpsilon];

    pub fn name(self) -> &'static str {
        match self {
            Command::CheckAssumption => "check-assumption",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Residuals => "residuals",
            Command::SweepEpsilon => "sweep-epsilon",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report_path: PathBuf,
    pub report: Report,
}

pub const FIELD_FILES: [&str; 5] = ["rho.csv", "u1.csv", "u2.csv", "u3.csv", "theta.csv"];

/// Runs `cmd` with the thread count of `config` and writes the report into
/// `out`. Exit code 0 on success, 1 on numerical failure, 2 on bad input.
pub fn run_command(cmd: Command, config: &RunConfig, out: &Path) -> Outcome {
    let mut report = Report::new(cmd.name(), config.to_text());
    let result = with_threads(config.threads, || match cmd {
        Command::CheckAssumption => check(config, &mut report),
        Command::Solve => solve(config, out, &mut report),
        Command::Verify => verify(config, &mut report),
        Command::Residuals => residuals(config, out, &mut report),
        Command::SweepEpsilon => sweep(config, &mut report),
    });
    let mut exit_code = match &result {
        Ok(ok) => i32::from(!*ok),
        Err(e) => e.exit_code(),
    };
    match &result {
        Ok(true) => report.set("status", "ok"),
        Ok(false) => report.set("status", "failed"),
        Err(e) => {
            report.set("status", "failed");
            report.set("error", e.to_string().replace('\n', " "));
        }
    }
    let report_path = out.join(format!("{}.txt", cmd.name()));
    if report.write(&report_path).is_err() && exit_code == 0 {
        exit_code = 1;
    }
    Outcome { exit_code, report_path, report }
}

fn params_of(config: &RunConfig) -> Result<Params> {
    Params::new(config.params.clone())
}

fn check(config: &RunConfig, r: &mut Report) -> Result<bool> {
    let p = params_of(config)?;
    let a = check_assumption(&p, &LambdaGrid::default())?;
    r.set_f64("cal_r", p.cal_r());
    r.set_f64("condition1_value", a.condition1_value);
    r.set("condition1_holds", a.condition1_holds);
    match a.lambda {
        Some((l0, l1)) => {
            r.set_f64("lambda0", l0);
            r.set_f64("lambda1", l1);
        }
        None => r.set("lambda", "none"),
    }
    r.set_f64("min_eigenvalue", a.min_eigenvalue);
    r.set("passing_pairs", a.passing.len());
    r.set("admissible", a.admissible);
    Ok(true)
}

fn record_solve(r: &mut Report, s: &SolveReport, params: &Params) {
    r.set("grid.N1", s.n1);
    r.set("grid.M", s.m);
    r.set("converged", s.converged);
    r.set("iterations", s.iterations);
    r.set("restarts", s.restarts);
    r.set_f64("h_used", s.h_used);
    r.set_f64("k_reg_used", s.k_reg_used);
    match s.contraction() {
        Some(c) => r.set_f64("contraction_ratio", c),
        None => r.set("contraction_ratio", "undefined"),
    }
    r.set_f64("solution_size", s.solution_size(params));
    for rec in &s.records {
        r.set(
            &format!("iter.{:03}", rec.iteration),
            format!(
                "difference={:.6e} N1={:.6e} N2={:.6e} mass_defect={:.3e} weak_residual={:.3e} linear_iterations={}",
                rec.difference, rec.n1, rec.n2, rec.mass_defect, rec.weak_residual, rec.linear_iterations
            ),
        );
    }
    if let Some(res) = &s.residuals {
        record_residuals(r, res);
    }
    if let Some(h) = s.heat_residual {
        r.set_f64("heat_residual_without_cal_r", h);
    }
}

fn record_residuals(r: &mut Report, res: &ResidualRecord) {
    r.set_f64("residual.mass", res.mass);
    r.set_list("residual.momentum", &res.momentum);
    r.set_f64("residual.energy", res.energy);
    for (f, face) in res.faces.iter().enumerate() {
        r.set_f64(&format!("residual.face{f}.normal"), face.normal);
        r.set_list(&format!("residual.face{f}.tangential"), &face.tangential);
        r.set_f64(&format!("residual.face{f}.temperature"), face.temperature);
    }
}

fn solve(config: &RunConfig, out: &Path, r: &mut Report) -> Result<bool> {
    let p = params_of(config)?;
    let grid = ChannelGrid::new(config.n1, config.m)?;
    let problem = ChannelProblem::new(&grid, &p, &config.wall_recipe(), &config.solver)?;
    r.set_f64("delta", problem.ext.delta);
    let s = iterate(&problem, &config.solver)?;
    record_solve(r, &s, &p);
    if config.output.dump_fields {
        std::fs::create_dir_all(out)?;
        let u = &s.final_state.u;
        for (name, f) in FIELD_FILES.iter().zip([&s.rho, &u.c[0], &u.c[1], &u.c[2], &s.theta]) {
            write_field_csv(&out.join(name), f)?;
        }
    }
    Ok(s.converged)
}

fn verify(config: &RunConfig, r: &mut Report) -> Result<bool> {
    let v = &config.verify;
    let grid = ChannelGrid::new(v.n1, v.m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    let korn = korn_suite(&grid, v.samples, &mut rng)?;
    let trace = poincare_trace_suite(&grid, v.samples, &mut rng);
    let zero_mean = poincare_zero_mean_suite(&grid, v.samples, &mut rng)?;
    let mut ok = true;
    for (name, s) in [("korn", &korn), ("poincare_trace", &trace), ("poincare_zero_mean", &zero_mean)] {
        r.set(&format!("{name}.samples"), s.samples);
        r.set(&format!("{name}.violations"), s.violations);
        r.set_f64(&format!("{name}.worst"), s.worst);
        ok &= s.violations == 0;
    }
    Ok(ok)
}

fn residuals(config: &RunConfig, out: &Path, r: &mut Report) -> Result<bool> {
    let dir = config.residuals_input.clone().unwrap_or_else(|| out.to_path_buf());
    r.set("input", dir.display());
    let mut fields = Vec::new();
    for name in FIELD_FILES {
        fields.push(read_field_csv(&dir.join(name))?);
    }
    let grid = fields[0].grid().clone();
    if fields.iter().any(|f| f.grid().n1() != grid.n1() || f.grid().m() != grid.m()) {
        return Err(Error::Domain("stored fields live on different grids".into()));
    }
    let fields: Vec<_> = fields.into_iter().map(|f| f.resample(&grid)).collect();
    let p = params_of(config)?;
    let wall = crate::boundary::make_wall_temperature(&config.wall_recipe(), &grid)?;
    let [rho, u1, u2, u3, theta]: [_; 5] = fields.try_into().map_err(|_| Error::Domain("field count".into()))?;
    let u = VectorField::new([u1, u2, u3]);
    r.set("grid.N1", grid.n1());
    r.set("grid.M", grid.m());
    let res = pde_residuals(&rho, &u, &theta, &p, &wall)?;
    record_residuals(r, &res);
    Ok(true)
}

/// Runs the solver at `epsilon`; `None` when it fails or does not converge.
pub fn try_solve(config: &RunConfig, epsilon: f64) -> Result<Option<SolveReport>> {
    let p = params_of(config)?;
    let grid = ChannelGrid::new(config.n1, config.m)?;
    let problem = match ChannelProblem::new(&grid, &p, &config.wall_recipe_with(epsilon), &config.solver) {
        Ok(pr) => pr,
        Err(Error::Domain(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    match iterate(&problem, &config.solver) {
        Ok(s) if s.converged => Ok(Some(s)),
        Ok(_) | Err(Error::Divergence(_)) | Err(Error::Domain(_)) | Err(Error::Stagnation { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn sweep(config: &RunConfig, r: &mut Report) -> Result<bool> {
    let sw = &config.sweep;
    let p = params_of(config)?;
    let (mut lo, mut hi) = (sw.eps_low, sw.eps_high);
    if try_solve(config, lo)?.is_none() {
        r.set("largest_converging_epsilon", "none");
        return Ok(false);
    }
    if try_solve(config, hi)?.is_some() {
        lo = hi;
    } else {
        for _ in 0..sw.bisections {
            let mid = (lo * hi).sqrt();
            if try_solve(config, mid)?.is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    r.set_f64("largest_converging_epsilon", lo);
    let mut ok = true;
    let mut prev: Option<f64> = None;
    for (i, &eps) in sw.table.iter().enumerate() {
        match try_solve(config, eps)? {
            Some(s) => {
                let size = s.solution_size(&p);
                let ratio = prev.map_or_else(|| "-".to_string(), |q| format!("{:?}", q / size));
                r.set(
                    &format!("table.{i}"),
                    format!("epsilon={eps:?} S={size:?} S_over_epsilon={:?} ratio_to_previous={ratio}", size / eps),
                );
                prev = Some(size);
            }
            None => {
                r.set(&format!("table.{i}"), format!("epsilon={eps:?} not converged"));
                prev = None;
                ok = false;
            }
        }
    }
    Ok(ok)
}
