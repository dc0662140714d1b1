//! Browser bindings: assumption check, admissibility map and a small solve.
//! Results are returned as JSON text so the page needs no glue beyond
//! `JSON.parse`.

use std::fmt::Write;

use slipflow::fixed_point::{iterate, ChannelProblem};
use slipflow::params::{check_assumption as check, LambdaGrid};
use slipflow::{ChannelGrid, Params, ParamsSpec, SolverSettings, WallMode, WallRecipe};
use wasm_bindgen::prelude::*;

fn spec(a_u1: f64, a_u2: f64, a_t1: f64, a_t2: f64) -> ParamsSpec {
    ParamsSpec { a_u1, a_u2, a_t1, a_t2, ..ParamsSpec::default() }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "null".into()
    }
}

fn error_json(msg: impl std::fmt::Display) -> String {
    format!("{{\"error\":{:?}}}", msg.to_string())
}

/// Admissibility of the slip coefficients with the remaining parameters at
/// their defaults.
#[wasm_bindgen]
pub fn check_assumption(a_u1: f64, a_u2: f64, a_t1: f64, a_t2: f64) -> String {
    let rep = match Params::new(spec(a_u1, a_u2, a_t1, a_t2)).and_then(|p| {
        let rep = check(&p, &LambdaGrid::default())?;
        Ok((p.cal_r(), rep))
    }) {
        Ok(r) => r,
        Err(e) => return error_json(e),
    };
    let (cal_r, a) = rep;
    let lambda = a.lambda.map_or_else(|| "null".into(), |(l0, l1)| format!("[{},{}]", num(l0), num(l1)));
    format!(
        "{{\"admissible\":{},\"condition1_holds\":{},\"condition1_value\":{},\"min_eigenvalue\":{},\"lambda\":{lambda},\"passing_pairs\":{},\"cal_r\":{}}}",
        a.admissible,
        a.condition1_holds,
        num(a.condition1_value),
        num(a.min_eigenvalue),
        a.passing.len(),
        num(cal_r)
    )
}

/// Row-major `n x n` map over `a_u2` (rows) and `a_t1` (columns), both on
/// `[lo, hi]`: 1 where admissible, 0 where not.
#[wasm_bindgen]
pub fn admissibility_map(a_u1: f64, a_t2: f64, lo: f64, hi: f64, n: usize) -> Vec<u8> {
    let n = n.clamp(2, 64);
    let step = (hi - lo) / (n - 1) as f64;
    let grid = LambdaGrid::default();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (a_u2, a_t1) = (lo + i as f64 * step, lo + j as f64 * step);
            let ok = Params::new(spec(a_u1, a_u2, a_t1, a_t2))
                .and_then(|p| check(&p, &grid))
                .is_ok_and(|r| r.admissible);
            out.push(u8::from(ok));
        }
    }
    out
}

/// Fixed-point solve for a single wall mode on a small grid. Returns the
/// iteration history and the temperature on the plane `x3 = 0`.
#[wasm_bindgen]
pub fn solve_small(epsilon: f64, m2: i32, n1: usize, m: usize) -> String {
    let n1 = n1.clamp(8, 16);
    let m = m.clamp(1, 6);
    let run = || {
        let g = ChannelGrid::new(n1, m)?;
        let p = Params::new(ParamsSpec::default())?;
        let s = SolverSettings::default();
        let recipe = WallRecipe {
            theta_bar: p.theta_bar(),
            epsilon,
            modes: vec![WallMode { axis: 2, m: i64::from(m2).clamp(-(m as i64), m as i64), amplitude: 1.0, face: 0 }],
        };
        let rep = iterate(&ChannelProblem::new(&g, &p, &recipe, &s)?, &s)?;
        Ok::<_, slipflow::Error>((g, p, rep))
    };
    let (g, p, rep) = match run() {
        Ok(r) => r,
        Err(e) => return error_json(e),
    };
    let list = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",");
    let nx = 48;
    let mut slice = Vec::with_capacity(nx * nx);
    for i in 0..nx {
        let x1 = i as f64 / (nx - 1) as f64;
        for j in 0..nx {
            slice.push(rep.theta.eval(x1, j as f64 / nx as f64, 0.0));
        }
    }
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\"converged\":{},\"iterations\":{},\"contraction\":{},\"solution_size\":{},\"differences\":[{}],\"residual\":{},\"slice_n\":{nx},\"theta_slice\":[{}],\"grid\":[{},{}],\"theta_bar\":{}}}",
        rep.converged,
        rep.iterations,
        rep.contraction().map_or_else(|| "null".into(), num),
        num(rep.solution_size(&p)),
        list(&rep.differences()),
        rep.residuals.as_ref().map_or_else(|| "null".into(), |r| num(r.max())),
        list(&slice),
        g.n1(),
        g.m(),
        num(p.theta_bar())
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_coefficients_are_admissible() {
        let s = check_assumption(1.0, 0.05, 0.05, 1.0);
        assert!(s.starts_with("{\"admissible\":true,"), "{s}");
        assert!(check_assumption(1.0, 3.0, 0.05, 1.0).contains("\"condition1_holds\":false"));
        assert!(check_assumption(1.0, -1.0, 0.05, 1.0).starts_with("{\"error\":"));
    }

    #[test]
    fn map_marks_large_a_u2_inadmissible() {
        let map = admissibility_map(1.0, 1.0, 0.05, 3.0, 4);
        assert_eq!(map.len(), 16);
        assert_eq!(map[0], 1);
        assert!(map[12..].iter().all(|&v| v == 0));
    }

    #[test]
    fn small_solve_reports_history() {
        let s = solve_small(0.0, 1, 8, 2);
        assert!(s.contains("\"converged\":true") && s.contains("\"iterations\":1"), "{s}");
        let s = solve_small(1e-2, 1, 10, 2);
        assert!(s.contains("\"converged\":true"), "{s}");
        assert!(s.contains("\"slice_n\":48"));
    }
}
