use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TG: &str = r#"
[problem]
kind = "taylor_green"
grid = [16, 16]
reynolds = 100.0

[integrator]
method = "rk4"
mode = "fixed"
dt = 0.01

[run]
t_end = 0.1
"#;

fn srk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_prints_csv_with_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tg.toml", TG);
    let o = srk(&["run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,h,E_kin,eps,rhs_evals_cum,rejections_cum");
    assert_eq!(lines.len(), 12);
    assert!(lines[11].starts_with("1.0000000000000001e-1,"));
}

#[test]
fn runs_are_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tg.toml", TG);
    let a = srk(&["run", &cfg, "--tol", "1e-7", "--integrator", "dp5"]);
    let b = srk(&["run", &cfg, "--tol", "1e-7", "--integrator", "dp5"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_dir_resume_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tg.toml", TG);
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();
    let o = srk(&["run", &cfg, "--out", &out_s, "--t-end", "0.05"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ck = out.join("final.bin");
    assert!(out.join("diagnostics.csv").exists() && ck.exists());

    let o = srk(&["run", &cfg, "--resume", &ck.to_string_lossy()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resumed = String::from_utf8(o.stdout).unwrap();
    let full = String::from_utf8(srk(&["run", &cfg]).stdout).unwrap();
    let tail: Vec<&str> = full.lines().skip(7).collect();
    let rest: Vec<&str> = resumed.lines().skip(2).collect();
    assert_eq!(tail, rest);

    let o = srk(&["spectrum", &ck.to_string_lossy()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("k,E\n"));
    assert!(text.lines().nth(2).unwrap().starts_with("1,"));
}

#[test]
fn bench_writes_sorted_report() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = r#"
[problem]
kind = "taylor_green"
grid = [16, 16]
reynolds = 100.0

[run]
t_end = 0.2

[reference]
dt = 0.001

[[cell]]
method = "rk4"
dt = [0.02, 0.01]

[[cell]]
method = "bs5"
tol = [1e-6]
"#;
    let m = write(dir.path(), "m.toml", matrix);
    let report = dir.path().join("wp.csv");
    let o = srk(&["bench", &m, "--out", &report.to_string_lossy()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(report).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("bs5,tol,"));
    assert!(rows[2].starts_with("rk4,dt,1.0000000000000000e-2"));
    assert!(rows.iter().skip(1).all(|r| r.ends_with(",ok")));
}

#[test]
fn errors_report_category_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tg.toml", TG);

    let o = srk(&["run", &cfg, "--integrator", "rk4", "--tol", "1e-6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]:"));

    let bad = write(dir.path(), "bad.toml", &format!("{TG}\nbogus = 1\n"));
    let o = srk(&["run", &bad]);
    assert_eq!(o.status.code(), Some(2));

    let o = srk(&["run", &dir.path().join("missing.toml").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[io]:"));

    let o = srk(&["spectrum", &cfg]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).starts_with("error[format]:"));
}

#[test]
fn out_of_range_tolerance_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tg.toml", TG);
    let o = srk(&["run", &cfg, "--integrator", "bs5", "--tol", "1e-11", "--t-end", "0.01"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: tol_abs"));
}
