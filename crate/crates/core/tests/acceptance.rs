//! Acceptance criteria at their stated tolerances. Prints one PASS/FAIL line
//! per criterion and exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slipflow::boundary::make_wall_temperature;
use slipflow::fixed_point::{iterate, ChannelProblem};
use slipflow::grid::half_derivative_pairing;
use slipflow::inequality::{korn_suite, poincare_trace_suite, random_field, verify_korn};
use slipflow::params::{check_assumption, compute_cal_r, condition1, LambdaGrid};
use slipflow::transport::{k_refinement, laplacian_scale, solve_transport};
use slipflow::{ChannelGrid, FaceField, Params, ParamsSpec, ScalarField, SolveReport, SolverSettings, VectorField, WallMode, WallRecipe};

mod common;
use common::{flow, jacobi_eigenvalues, manufactured_h, oracle_matrix, pairing_oracle, phi_star};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn max_abs(f: &ScalarField) -> f64 {
    f.to_physical().vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn recipe(epsilon: f64) -> WallRecipe {
    WallRecipe { theta_bar: 1.0, epsilon, modes: vec![WallMode { axis: 2, m: 1, amplitude: 1.0, face: 0 }] }
}

struct Run {
    epsilon: f64,
    report: SolveReport,
    elapsed: Duration,
}

fn solve(n1: usize, m: usize, epsilon: f64) -> Result<Run, String> {
    let p = Params::new(ParamsSpec::default()).map_err(|e| e.to_string())?;
    let s = SolverSettings { tol_fp: 1e-11, ..SolverSettings::default() };
    let g = ChannelGrid::new(n1, m).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let problem = ChannelProblem::new(&g, &p, &recipe(epsilon), &s).map_err(|e| e.to_string())?;
    let report = iterate(&problem, &s).map_err(|e| format!("{n1}/{m} epsilon {epsilon:e}: {e}"))?;
    Ok(Run { epsilon, report, elapsed: start.elapsed() })
}

fn trivial_solution() -> Outcome {
    let start = Instant::now();
    let g = ChannelGrid::new(16, 8).map_err(|e| e.to_string())?;
    let p = Params::new(ParamsSpec::default()).map_err(|e| e.to_string())?;
    let s = SolverSettings::default();
    let rep = iterate(&ChannelProblem::new(&g, &p, &recipe(0.0), &s).map_err(|e| e.to_string())?, &s)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let res = rep.residuals.as_ref().map_or(f64::INFINITY, |r| r.max());
    let rho_err = max_abs(&rep.rho.sub(&ScalarField::constant(&g, p.rho_bar())));
    let theta_err = max_abs(&rep.theta.sub(&ScalarField::constant(&g, p.theta_bar())));
    let u_err = rep.velocity().c.iter().map(max_abs).fold(0.0, f64::max);
    ensure(rep.converged && rep.iterations == 1, format!("iterations {} converged {}", rep.iterations, rep.converged))?;
    ensure(res <= 1e-12, format!("residual {res:.3e}"))?;
    ensure(rho_err <= 1e-12 && theta_err <= 1e-12 && u_err <= 1e-12, format!("field errors {rho_err:e} {u_err:e} {theta_err:e}"))?;
    ensure(elapsed < Duration::from_secs(5), format!("runtime {elapsed:.2?}"))?;
    Ok(format!("1 iteration, max residual {res:.1e}, {elapsed:.2?}"))
}

fn main_estimate(runs: &[Run], p: &Params) -> Outcome {
    let sizes: Vec<f64> = runs.iter().map(|r| r.report.solution_size(p)).collect();
    let mut ratios = Vec::new();
    for (w, s) in runs.windows(2).zip(sizes.windows(2)) {
        ensure(w[1].epsilon == w[0].epsilon / 2.0, "runs are not successive halvings".into())?;
        ratios.push(s[0] / s[1]);
    }
    for r in runs {
        ensure(r.report.converged, format!("epsilon {:e} did not converge", r.epsilon))?;
        ensure(r.elapsed < Duration::from_secs(300), format!("epsilon {:e} took {:.1?}", r.epsilon, r.elapsed))?;
    }
    ensure(ratios.iter().all(|q| (1.8..=2.2).contains(q)), format!("ratios {ratios:?}"))?;
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap_or_default();
    Ok(format!("S(eps)/S(eps/2) = {:?}, slowest run {slowest:.1?}", ratios.iter().map(|q| format!("{q:.4}")).collect::<Vec<_>>()))
}

fn contraction(runs: &[Run]) -> Outcome {
    let mut worst = 0.0f64;
    let mut growth = 0.0f64;
    for r in runs {
        let c = r.report.contraction().ok_or(format!("epsilon {:e}: fewer than two iterations", r.epsilon))?;
        worst = worst.max(c);
        let first = r.report.records[0].n2;
        growth = growth.max(r.report.records.iter().map(|x| x.n2 / first).fold(0.0, f64::max));
    }
    ensure(worst < 1.0, format!("contraction ratio {worst}"))?;
    ensure(growth <= 10.0, format!("N2 grew to {growth} x first iterate"))?;
    Ok(format!("worst contraction ratio {worst:.3}, max N2 / first {growth:.3}"))
}

fn assumption_checker() -> Outcome {
    let spec = ParamsSpec { a_u1: 1.0, a_u2: 0.05, a_t1: 0.05, a_t2: 1.0, ..ParamsSpec::default() };
    let p = Params::new(spec.clone()).map_err(|e| e.to_string())?;
    let rep = check_assumption(&p, &LambdaGrid::default()).map_err(|e| e.to_string())?;
    ensure(rep.admissible, "small-coefficient regime not admissible".into())?;
    let (l0, l1) = rep.lambda.ok_or("no lambda pair")?;
    let oracle_min = jacobi_eigenvalues(oracle_matrix(&spec, l0, l1)).into_iter().fold(f64::INFINITY, f64::min);
    ensure((rep.min_eigenvalue - oracle_min).abs() <= 1e-10, format!("eigenvalue {} vs {oracle_min}", rep.min_eigenvalue))?;
    let direct = |s: &ParamsSpec| {
        let ka = s.kappa0 * s.theta_bar.powf(1.0 - s.gamma / 2.0);
        let r = s.gas_constant;
        s.rho_bar * s.a_t1 * ka / s.theta_bar * (16.0 / (15.0 * r) - 2.0 / (5.0 * r) * s.a_u2)
    };
    ensure((rep.condition1_value - direct(&spec)).abs() <= 1e-10, "condition 1 mismatch (admissible case)".into())?;

    let bad = ParamsSpec { a_u2: 3.0, ..spec };
    let pb = Params::new(bad.clone()).map_err(|e| e.to_string())?;
    let rb = check_assumption(&pb, &LambdaGrid::default()).map_err(|e| e.to_string())?;
    ensure(!rb.condition1_holds && !rb.admissible, "a_u2 = 3 passes condition 1".into())?;
    ensure((rb.condition1_value - direct(&bad)).abs() <= 1e-10, "condition 1 mismatch (a_u2 = 3)".into())?;
    ensure(condition1(&pb) == rb.condition1_value, "condition1 disagrees with the report".into())?;
    Ok(format!(
        "min eigenvalue {:.6e} (oracle diff {:.1e}), condition 1 at a_u2 = 3: {:.4}",
        rep.min_eigenvalue,
        (rep.min_eigenvalue - oracle_min).abs(),
        rb.condition1_value
    ))
}

fn random_admissible(rng: &mut ChaCha8Rng) -> Option<Params> {
    let spec = ParamsSpec {
        gas_constant: rng.gen_range(0.2..5.0),
        adiabatic: rng.gen_range(1.05..3.0),
        mu0: rng.gen_range(0.1..5.0),
        kappa0: rng.gen_range(0.1..5.0),
        gamma: rng.gen_range(-2.9..1.0),
        a_u1: rng.gen_range(0.01..3.0),
        a_u2: rng.gen_range(0.01..2.5),
        a_t1: rng.gen_range(0.01..3.0),
        a_t2: rng.gen_range(0.01..3.0),
        rho_bar: rng.gen_range(0.1..10.0),
        theta_bar: rng.gen_range(0.1..10.0),
    };
    let p = Params::new(spec).ok()?;
    check_assumption(&p, &LambdaGrid::default()).ok()?.admissible.then_some(p)
}

fn cal_r_consistency(runs: &[&Run], tol_linear: f64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut found, mut drawn, mut worst) = (0, 0, 0.0f64);
    while found < 100 {
        drawn += 1;
        ensure(drawn <= 100_000, "too few admissible parameter sets".into())?;
        let Some(p) = random_admissible(&mut rng) else { continue };
        let (l, r) = p.cal_r_balance(compute_cal_r(&p));
        worst = worst.max((l - r).abs() / l.abs().max(r.abs()));
        found += 1;
    }
    ensure(worst <= 1e-12, format!("balance defect {worst:e}"))?;
    let mut heat = 0.0f64;
    for r in runs {
        let h = r.report.heat_residual.ok_or("missing heat residual")?;
        ensure(h <= 10.0 * tol_linear, format!("epsilon {:e}: heat residual {h:e}", r.epsilon))?;
        heat = heat.max(h);
    }
    Ok(format!("balance defect {worst:.1e} over 100 sets, heat residual {heat:.1e} over {} fixed points", runs.len()))
}

fn inequality_suites() -> Outcome {
    let g = ChannelGrid::new(8, 2).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let korn = korn_suite(&g, 10_000, &mut rng).map_err(|e| e.to_string())?;
    let trace = poincare_trace_suite(&g, 10_000, &mut rng);
    ensure(korn.violations == 0 && trace.violations == 0, format!("violations {} / {}", korn.violations, trace.violations))?;

    let g = ChannelGrid::new(16, 3).map_err(|e| e.to_string())?;
    let z = ScalarField::zeros(&g);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * b.abs();
    let shear = VectorField::new([z.clone(), ScalarField::from_fn(&g, |_, x2, _| (2.0 * PI * x2).sin()), z.clone()]);
    let k1 = verify_korn(&shear.into_tangential(1e-14).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(close(k1.lhs, 2.0 * PI * PI) && close(k1.rhs, 8.0 * PI * PI / 3.0), format!("shear example {k1:?}"))?;
    let normal = VectorField::new([ScalarField::from_fn(&g, |x1, _, _| (PI * x1).sin()), z.clone(), z]);
    let k2 = verify_korn(&normal.into_tangential(1e-14).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(close(k2.lhs, PI * PI / 2.0) && close(k2.rhs, 2.0 * PI * PI / 3.0), format!("normal example {k2:?}"))?;
    Ok(format!("worst ratios Korn {:.4}, trace {:.4} over 10^4 fields each", korn.worst, trace.worst))
}

fn pairing_structure() -> Outcome {
    let g = ChannelGrid::new(8, 3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut diag = 0.0f64;
    for _ in 0..1000 {
        let a = random_field(&g, 3, false, &mut rng).trace(0);
        let b = random_field(&g, 3, false, &mut rng).trace(1);
        diag = diag.max(half_derivative_pairing(&a, &b, &a, &b).abs());
    }
    ensure(diag <= 1e-13, format!("diagonal {diag:e}"))?;
    let z = FaceField::zeros(&g);
    let mut off = 0.0f64;
    for (m2, m3) in [(1.0, 0.0), (1.0, 2.0), (0.0, -3.0)] {
        let fa = move |x2: f64, x3: f64| (2.0 * PI * (m2 * x2 + m3 * x3)).cos();
        let fb = move |x2: f64, x3: f64| (2.0 * PI * (m2 * x2 + m3 * x3)).sin();
        let v = half_derivative_pairing(&FaceField::from_fn(&g, fa), &FaceField::from_fn(&g, fb), &z, &z);
        off = off.max((v - pairing_oracle(fa, fb, 3)).abs());
    }
    ensure(off <= 1e-12, format!("off-diagonal mismatch {off:e}"))?;
    Ok(format!("max diagonal {diag:.1e} over 10^3 fields, off-diagonal oracle diff {off:.1e}"))
}

fn transport_regularization() -> Outcome {
    const TOL: f64 = 1e-13;
    let g = ChannelGrid::new(12, 4).map_err(|e| e.to_string())?;
    let cos2 = |g: &Arc<ChannelGrid>| ScalarField::from_fn(g, |_, x2, _| (2.0 * PI * x2).cos());
    let mut sym = 0.0f64;
    for k in [1.0, 10.0, 1e4, 1e8] {
        let phi = solve_transport(&VectorField::zeros(&g), &cos2(&g), 0.7, k, TOL).map_err(|e| e.to_string())?;
        sym = sym.max(max_abs(&phi.sub(&cos2(&g).scale(1.0 / (1.0 + 4.0 * PI * PI / k)))));
    }
    ensure(sym <= 1e-12, format!("symbol error {sym:e}"))?;

    let g = ChannelGrid::new(20, 6).map_err(|e| e.to_string())?;
    let phi = solve_transport(&flow(&g), &manufactured_h(&g, 0.5), 0.5, 1e8, TOL).map_err(|e| e.to_string())?;
    let mms = max_abs(&phi.sub(&phi_star(&g)));
    ensure(mms <= 1e-6, format!("manufactured error {mms:e}"))?;

    let g = ChannelGrid::new(16, 6).map_err(|e| e.to_string())?;
    let ks: Vec<f64> = [1e4, 1e6, 1e8].iter().map(|k| k * laplacian_scale(&g)).collect();
    let (_, rep) = k_refinement(&flow(&g), &manufactured_h(&g, 0.5), 0.5, &ks, TOL).map_err(|e| e.to_string())?;
    ensure(rep.monotone, format!("k-refinement differences {:?}", rep.differences))?;
    Ok(format!("symbol error {sym:.1e}, manufactured error {mms:.1e}, k-refinement differences {:.1e}", rep.differences.iter().fold(0.0f64, |a, &b| a.max(b))))
}

fn resolution(coarse: &Run, fine: &Run) -> Outcome {
    let r = |run: &Run| run.report.residuals.as_ref().map_or(f64::INFINITY, |x| x.interior_max());
    let (c, f) = (r(coarse), r(fine));
    ensure(coarse.report.converged && fine.report.converged, "a run did not converge".into())?;
    ensure(c >= 4.0 * f, format!("interior residuals {c:e} -> {f:e}"))?;
    Ok(format!("interior residual {c:.2e} at 16/8 -> {f:.2e} at 32/16 ({:.0}x)", c / f))
}

fn report(n: usize, name: &str, outcome: Outcome) -> bool {
    match outcome {
        Ok(msg) => {
            println!("criterion {n} PASS  {name}: {msg}");
            true
        }
        Err(msg) => {
            println!("criterion {n} FAIL  {name}: {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    let p = Params::new(ParamsSpec::default()).expect("default parameters");
    // Sanity: the wall recipe is realizable on the coarse grid.
    let g = ChannelGrid::new(16, 8).expect("grid");
    make_wall_temperature(&recipe(1e-2), &g).expect("wall temperature");

    let fine: Vec<Result<Run, String>> = [1e-2, 5e-3, 2.5e-3, 1.25e-3].iter().map(|&e| solve(32, 16, e)).collect();
    let coarse = solve(16, 8, 1e-2);
    let fine: Result<Vec<Run>, String> = fine.into_iter().collect();

    let mut ok = true;
    ok &= report(1, "trivial solution", trivial_solution());
    ok &= report(2, "main estimate scaling", fine.as_ref().map_err(Clone::clone).and_then(|r| main_estimate(r, &p)));
    ok &= report(3, "contraction", fine.as_ref().map_err(Clone::clone).and_then(|r| contraction(r)));
    ok &= report(4, "assumption checker", assumption_checker());
    let fixed_points: Result<Vec<&Run>, String> = match (&fine, &coarse) {
        (Ok(f), Ok(c)) => Ok(f.iter().chain(std::iter::once(c)).collect()),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    ok &= report(5, "cal_r consistency", fixed_points.and_then(|r| cal_r_consistency(&r, SolverSettings::default().tol_linear)));
    ok &= report(6, "inequality suites", inequality_suites());
    ok &= report(7, "fractional pairing", pairing_structure());
    ok &= report(8, "transport regularization", transport_regularization());
    let pair = match (&coarse, &fine) {
        (Ok(c), Ok(f)) => resolution(c, &f[0]),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    ok &= report(9, "resolution convergence", pair);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
