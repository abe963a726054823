use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agecontrol_cli::csv::import_field_csv;
use agecontrol_core::Grid;

const BASE: &str = r#"
seed = 7

[grid]
T = 1.0
A = 2.0
nt = 8
nx = 13
x0 = 0.3

[rates]
fertility = "ramp"
fertility_value = 1.0
abar = 0.25

[certify]
samples = 2
s = [0.5, 1.0]

[control]
delta = 1.5
epsilon = 1e-3
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agecontrol"))
}

fn run(dir: &Path, config: &str, args: &[&str], out: &str) -> Output {
    let cfg = dir.join(format!("{out}.toml"));
    fs::write(&cfg, config).unwrap();
    bin().args(args).arg("--config").arg(&cfg).arg("--out").arg(dir.join(out)).env_remove("AGECONTROL_OUT").output().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn grid() -> Grid {
    Grid::aligned(1.0, 2.0, 8, 13, 0.3).unwrap()
}

#[test]
fn simulate_with_zero_data_writes_zeros() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}\n[simulate]\ninitial = \"zero\"\ncontrol = \"zero\"\n");
    let out = run(tmp.path(), &cfg, &["simulate"], "sim");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("sim");
    let traj = import_field_csv(&dir.join("trajectory.csv"), &grid()).unwrap();
    assert!(traj.values().iter().all(|&v| v == 0.0));
    let text = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(text.starts_with("t,a,x,value\n"));
    assert!(!text.contains('\r'));
    assert!(fs::read_to_string(dir.join("terminal.csv")).unwrap().starts_with("a,x,value\n"));
    assert!(dir.join("config.resolved.toml").exists() && dir.join("summary.json").exists());
}

#[test]
fn resolved_config_replays_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), BASE, &["adjoint"], "first");
    assert!(out.status.success());
    let echo = fs::read_to_string(tmp.path().join("first/config.resolved.toml")).unwrap();
    assert!(echo.contains("na = 16"));
    let out = run(tmp.path(), &echo, &["adjoint"], "second");
    assert!(out.status.success());
    assert_eq!(files(&tmp.path().join("first")), files(&tmp.path().join("second")));
}

#[test]
fn certify_and_control_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, extra) in [("certify", vec![]), ("certify", vec!["--inequality", "observability"]), ("control", vec![])] {
        let mut args = vec![cmd];
        args.extend(extra.iter());
        let a = run(tmp.path(), BASE, &args, "a");
        let b = run(tmp.path(), BASE, &args, "b");
        assert!(a.status.success(), "{cmd}: {}", String::from_utf8_lossy(&a.stderr));
        assert!(b.status.success());
        let (fa, fb) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
        assert!(fa.iter().any(|(n, _)| n.ends_with(".csv")));
        assert_eq!(fa, fb, "{cmd} outputs differ");
        fs::remove_dir_all(tmp.path().join("a")).unwrap();
        fs::remove_dir_all(tmp.path().join("b")).unwrap();
    }
}

#[test]
fn certify_report_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), BASE, &["certify", "--samples", "3"], "c");
    assert!(out.status.success());
    let text = fs::read_to_string(tmp.path().join("c/reports.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "inequality_id,s,delta,sample_id,lhs,rhs,ratio,grid,seed");
    let rows: Vec<&str> = lines.collect();
    // 3 samples x 2 values of s
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.starts_with("carleman,") && r.ends_with(",7") && r.split(',').count() == 9));
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), BASE, &["certify", "--samples", "0"], "zero");
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(record["error"]["kind"], "validation");

    let out = run(tmp.path(), &format!("{BASE}\nbogus = 1\n"), &["simulate"], "unknown");
    assert_eq!(out.status.code(), Some(2));

    let out = run(tmp.path(), BASE, &["control", "--delta", "0.9"], "regime");
    assert_eq!(out.status.code(), Some(2));

    let out = run(tmp.path(), BASE, &["run"], "nocommand");
    assert_eq!(out.status.code(), Some(2));

    let out = bin().arg("simulate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_4_with_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = BASE.replace("epsilon = 1e-3", "epsilon = 1e-8\nmax_iters = 1\ntol = 1e-12");
    let out = run(tmp.path(), &cfg, &["control"], "nc");
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("nc");
    assert!(dir.join("control.csv").exists() && dir.join("error.json").exists());
}

#[test]
fn run_uses_config_command_and_env_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    fs::write(&cfg, format!("command = \"adjoint\"\n{BASE}")).unwrap();
    let root: PathBuf = tmp.path().join("from-env");
    let out = bin().arg("run").arg("--config").arg(&cfg).env("AGECONTROL_OUT", &root).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("adjoint.csv").exists());
    // the flag wins over the environment
    let flag = tmp.path().join("from-flag");
    let out = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&flag).env("AGECONTROL_OUT", &root).output().unwrap();
    assert!(out.status.success());
    assert!(flag.join("adjoint.csv").exists());
}

#[test]
fn sweep_runs_cartesian_product() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}\n[sweep]\ncommand = \"certify\"\nalpha = [0.5, 1.5]\nseed = [1, 2, 3]\n");
    let out = run(tmp.path(), &cfg, &["sweep"], "sw");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "point,alpha,seed,metric,value,exit_code");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0,0.5,1,empirical_constant,"));
    assert!(lines[6].starts_with("5,1.5,3,"));
    assert!(tmp.path().join("sw/point-0005/reports.csv").exists());
}
