//! Run configuration: flat `section.key = value` lines, `#` comments.
//!
//! ```text
//! grid.N1 = 16
//! grid.M = 8
//! wall.epsilon = 1e-2
//! wall.modes = (2, 1, 1.0, 0); (3, -2, 0.5, 1)
//! solver.h = 0.5
//! solver.k_reg = 1e4, 1e6, 1e8
//! ```
//!
//! A wall mode is `(axis, m, amplitude, face)`; see [`WallMode`].

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::boundary::{WallMode, WallRecipe};
use crate::error::{Error, Result};
use crate::fixed_point::SolverSettings;
use crate::params::ParamsSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub dump_fields: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub n1: usize,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub eps_low: f64,
    pub eps_high: f64,
    pub bisections: usize,
    /// Values of epsilon for the `S(eps)` table.
    pub table: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ParamsSpec,
    pub n1: usize,
    pub m: usize,
    pub epsilon: f64,
    pub modes: Vec<WallMode>,
    pub solver: SolverSettings,
    /// 0 uses every available core.
    pub threads: usize,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
    pub sweep: SweepConfig,
    /// Directory holding a stored solution for the `residuals` command.
    pub residuals_input: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ParamsSpec::default(),
            n1: 16,
            m: 8,
            epsilon: 1e-2,
            modes: vec![WallMode { axis: 2, m: 1, amplitude: 1.0, face: 0 }],
            solver: SolverSettings::default(),
            threads: 0,
            output: OutputConfig { dir: PathBuf::from("out"), dump_fields: true },
            verify: VerifyConfig { samples: 10_000, seed: 7, n1: 8, m: 2 },
            sweep: SweepConfig { eps_low: 1e-3, eps_high: 1.0, bisections: 8, table: vec![1e-2, 5e-3, 2.5e-3] },
            residuals_input: None,
        }
    }
}

impl RunConfig {
    pub fn wall_recipe(&self) -> WallRecipe {
        self.wall_recipe_with(self.epsilon)
    }

    pub fn wall_recipe_with(&self, epsilon: f64) -> WallRecipe {
        WallRecipe { theta_bar: self.params.theta_bar, epsilon, modes: self.modes.clone() }
    }

    /// Every key with its resolved value, in a fixed order. Parsing the
    /// output gives back the same configuration.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let s = &self.solver;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let modes = self
            .modes
            .iter()
            .map(|md| format!("({}, {}, {:?}, {})", md.axis, md.m, md.amplitude, md.face))
            .collect::<Vec<_>>()
            .join("; ");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("params.gas_constant", format!("{:?}", p.gas_constant));
        kv("params.adiabatic", format!("{:?}", p.adiabatic));
        kv("params.mu0", format!("{:?}", p.mu0));
        kv("params.kappa0", format!("{:?}", p.kappa0));
        kv("params.gamma", format!("{:?}", p.gamma));
        kv("params.a_u1", format!("{:?}", p.a_u1));
        kv("params.a_u2", format!("{:?}", p.a_u2));
        kv("params.a_t1", format!("{:?}", p.a_t1));
        kv("params.a_t2", format!("{:?}", p.a_t2));
        kv("params.rho_bar", format!("{:?}", p.rho_bar));
        kv("params.theta_bar", format!("{:?}", p.theta_bar));
        kv("grid.N1", self.n1.to_string());
        kv("grid.M", self.m.to_string());
        kv("wall.epsilon", format!("{:?}", self.epsilon));
        kv("wall.modes", modes);
        kv("solver.h", format!("{:?}", s.h));
        kv("solver.k_reg", list(&s.k_reg));
        kv("solver.tol_linear", format!("{:?}", s.tol_linear));
        kv("solver.tol_fp", format!("{:?}", s.tol_fp));
        kv("solver.max_iter", s.max_iter.to_string());
        kv("solver.retry_budget", s.retry_budget.to_string());
        kv("solver.ball_radius", format!("{:?}", s.ball_radius));
        kv("solver.gmres_restart", s.gmres_restart.to_string());
        kv("solver.gmres_max_iter", s.gmres_max_iter.to_string());
        kv("solver.threads", self.threads.to_string());
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.dump_fields", self.output.dump_fields.to_string());
        kv("verify.samples", self.verify.samples.to_string());
        kv("verify.seed", self.verify.seed.to_string());
        kv("verify.N1", self.verify.n1.to_string());
        kv("verify.M", self.verify.m.to_string());
        kv("sweep.eps_low", format!("{:?}", self.sweep.eps_low));
        kv("sweep.eps_high", format!("{:?}", self.sweep.eps_high));
        kv("sweep.bisections", self.sweep.bisections.to_string());
        kv("sweep.table", list(&self.sweep.table));
        kv(
            "residuals.input",
            self.residuals_input.as_ref().map_or_else(String::new, |p| p.display().to_string()),
        );
        out
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| err(line, format!("`{key}`: cannot parse `{v}`")))
}

fn float_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| num(line, key, s.trim())).collect()
}

fn modes(line: usize, v: &str) -> Result<Vec<WallMode>> {
    let mut out = Vec::new();
    for item in v.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let inner = item
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| err(line, format!("wall mode `{item}` must look like (axis, m, amplitude, face)")))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(err(line, format!("wall mode `{item}` needs four entries")));
        }
        let md = WallMode {
            axis: num(line, "wall.modes", parts[0])?,
            m: num(line, "wall.modes", parts[1])?,
            amplitude: num(line, "wall.modes", parts[2])?,
            face: num(line, "wall.modes", parts[3])?,
        };
        if md.axis != 2 && md.axis != 3 {
            return Err(err(line, "wall mode axis must be 2 or 3"));
        }
        if md.face > 1 {
            return Err(err(line, "wall mode face must be 0 or 1"));
        }
        out.push(md);
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    let mut line_of = std::collections::HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, val) = body
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line, format!("expected `section.key = value`, got `{body}`")))?;
        let p = &mut c.params;
        let s = &mut c.solver;
        match key {
            "params.gas_constant" => p.gas_constant = num(line, key, val)?,
            "params.adiabatic" => p.adiabatic = num(line, key, val)?,
            "params.mu0" => p.mu0 = num(line, key, val)?,
            "params.kappa0" => p.kappa0 = num(line, key, val)?,
            "params.gamma" => p.gamma = num(line, key, val)?,
            "params.a_u1" => p.a_u1 = num(line, key, val)?,
            "params.a_u2" => p.a_u2 = num(line, key, val)?,
            "params.a_t1" => p.a_t1 = num(line, key, val)?,
            "params.a_t2" => p.a_t2 = num(line, key, val)?,
            "params.rho_bar" => p.rho_bar = num(line, key, val)?,
            "params.theta_bar" => p.theta_bar = num(line, key, val)?,
            "grid.N1" => c.n1 = num(line, key, val)?,
            "grid.M" => c.m = num(line, key, val)?,
            "wall.epsilon" => c.epsilon = num(line, key, val)?,
            "wall.modes" => c.modes = modes(line, val)?,
            "solver.h" => s.h = num(line, key, val)?,
            "solver.k_reg" => s.k_reg = float_list(line, key, val)?,
            "solver.tol_linear" => s.tol_linear = num(line, key, val)?,
            "solver.tol_fp" => s.tol_fp = num(line, key, val)?,
            "solver.max_iter" => s.max_iter = num(line, key, val)?,
            "solver.retry_budget" => s.retry_budget = num(line, key, val)?,
            "solver.ball_radius" => s.ball_radius = num(line, key, val)?,
            "solver.gmres_restart" => s.gmres_restart = num(line, key, val)?,
            "solver.gmres_max_iter" => s.gmres_max_iter = num(line, key, val)?,
            "solver.threads" => c.threads = num(line, key, val)?,
            "output.dir" => c.output.dir = PathBuf::from(val),
            "output.dump_fields" => c.output.dump_fields = num(line, key, val)?,
            "verify.samples" => c.verify.samples = num(line, key, val)?,
            "verify.seed" => c.verify.seed = num(line, key, val)?,
            "verify.N1" => c.verify.n1 = num(line, key, val)?,
            "verify.M" => c.verify.m = num(line, key, val)?,
            "sweep.eps_low" => c.sweep.eps_low = num(line, key, val)?,
            "sweep.eps_high" => c.sweep.eps_high = num(line, key, val)?,
            "sweep.bisections" => c.sweep.bisections = num(line, key, val)?,
            "sweep.table" => c.sweep.table = float_list(line, key, val)?,
            "residuals.input" => c.residuals_input = (!val.is_empty()).then(|| PathBuf::from(val)),
            _ => return Err(err(line, format!("unknown key `{key}`"))),
        }
        line_of.insert(key.to_string(), line);
    }
    let at = |k: &str| line_of.get(k).copied().unwrap_or(0);
    if c.n1 < 8 {
        return Err(err(at("grid.N1"), format!("grid.N1 = {} is below the minimum 8", c.n1)));
    }
    if c.m < 1 {
        return Err(err(at("grid.M"), "grid.M must be at least 1"));
    }
    if c.verify.n1 < 8 || c.verify.m < 1 {
        return Err(err(at("verify.N1").max(at("verify.M")), "verify grid needs N1 >= 8 and M >= 1"));
    }
    if !(c.epsilon >= 0.0 && c.epsilon.is_finite()) {
        return Err(err(at("wall.epsilon"), "wall.epsilon must be finite and nonnegative"));
    }
    if let Some(md) = c.modes.iter().find(|md| md.m.unsigned_abs() as usize > c.m) {
        return Err(err(at("wall.modes"), format!("wall mode m = {} exceeds grid.M = {}", md.m, c.m)));
    }
    if let Err(Error::InvalidParams(msg)) = c.solver.validate() {
        let first = ["solver.h", "solver.k_reg", "solver.tol_linear", "solver.tol_fp", "solver.max_iter", "solver.ball_radius"]
            .iter()
            .map(|k| at(k))
            .max()
            .unwrap_or(0);
        return Err(err(first, msg));
    }
    if !(0.0 < c.sweep.eps_low && c.sweep.eps_low < c.sweep.eps_high) {
        return Err(err(at("sweep.eps_low").max(at("sweep.eps_high")), "need 0 < sweep.eps_low < sweep.eps_high"));
    }
    if c.sweep.table.iter().any(|e| !(*e > 0.0)) {
        return Err(err(at("sweep.table"), "sweep.table entries must be positive"));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn override_and_errors() {
        let c = parse_config("solver.h = 0.05").unwrap();
        assert_eq!(c.solver.h, 0.05);
        match parse_config("\ngrid.N1 = 4") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("grid.nope = 1"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("solver.h = fast"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("solver.h = -1"), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.modes.push(WallMode { axis: 3, m: -2, amplitude: 0.25, face: 1 });
        c.residuals_input = Some(PathBuf::from("stored"));
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }
}
