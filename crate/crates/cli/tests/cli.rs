use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slipflow"));
    cmd.args(args).env_remove("NSF_THREADS");
    if let Some(t) = threads {
        cmd.env("NSF_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn check_assumption_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let o = run(&["check-assumption", "--config", &cfg, "--out", out_dir.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out_dir.join("check-assumption.txt")).unwrap();
    assert!(report.contains("admissible = true"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("check-assumption ok"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.N1 = 4\n");
    let out = dir.path().to_str().unwrap();
    let o = run(&["solve", "--config", &cfg, "--out", out], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let missing = dir.path().join("nope.cfg");
    assert_eq!(run(&["solve", "--config", missing.to_str().unwrap()], None).status.code(), Some(2));
    assert_eq!(run(&["launch", "--config", &cfg], None).status.code(), Some(2));
    assert_eq!(run(&["solve"], None).status.code(), Some(2));

    let cfg = write_config(dir.path(), "");
    assert_eq!(run(&["check-assumption", "--config", &cfg, "--out", out], Some("many")).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "params.a_u2 = 3\ngrid.N1 = 8\ngrid.M = 2\n");
    let o = run(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_override_is_recorded_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.N1 = 10\ngrid.M = 3\nwall.epsilon = 5e-3\n");
    let mut reports = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = dir.path().join(name);
        let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()], Some(threads));
        assert_eq!(o.status.code(), Some(0));
        reports.push(fs::read_to_string(out.join("solve.txt")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert!(reports[0].contains("solver.threads = 1\n"));
    assert!(reports[2].contains("solver.threads = 3\n"));
    let body = |r: &str| r.split("[config]").next().unwrap().to_string();
    assert_eq!(body(&reports[0]), body(&reports[2]));
}
