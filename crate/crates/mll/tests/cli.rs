use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mll::io::load_snapshot;
use mll::lab::{fit_slope, read_sweep_csv, ExperimentConfig, PrepMode};

const TINY: &[&str] = &[
    "grid.ny=128",
    "grid.ly=32",
    "grid.p_max=4",
    "envelope.sigma=2.5",
    "eps_list=[0.2,0.1,0.05]",
    "t_horizon=0.2",
    "dt=0.01",
    "snapshots=4",
    "record_timing=false",
];

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("mll-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn mll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mll")).args(args).output().unwrap()
}

fn run_tiny(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd.to_string()];
    for s in TINY.iter().chain(extra) {
        args.push("--set".into());
        args.push(s.to_string());
    }
    args.push("--out".into());
    args.push(out.display().to_string());
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    mll(&refs)
}

#[test]
fn dispersion_and_transparency_outputs() {
    let d = scratch("spec");
    let o = mll(&["dispersion", "--n", "11", "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(d.join("dispersion.csv")).unwrap();
    assert_eq!(text.lines().count(), 12);
    let o = mll(&["transparency", "--xi-max", "3", "--n", "7", "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("transparency.json")).unwrap()).unwrap();
    assert!(rep["max_ratio"].as_f64().unwrap() > 0.0);
    assert!(rep["closed_form_max_err"].as_f64().unwrap() < 1e-10);
    let o = mll(&["dispersion", "--n", "1", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_is_deterministic_and_reportable() {
    let a = scratch("sweep-a");
    let b = scratch("sweep-b");
    assert!(run_tiny("sweep", &a, &[]).status.success());
    assert!(run_tiny("sweep", &b, &[]).status.success());
    let ca = std::fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(ca, std::fs::read(b.join("sweep.csv")).unwrap());
    let header = String::from_utf8(ca).unwrap();
    assert!(header.starts_with("eps,err_pi0_inf,err_pis_inf,res_pi0,res_pis,wall_s"));
    let slopes: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("slopes.json")).unwrap()).unwrap();
    assert_eq!(slopes["mode"], "prepared");
    let rows = read_sweep_csv(&a.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    let fit = fit_slope(&rows.iter().map(|r| (r.eps, r.err_pis_inf)).collect::<Vec<_>>()).unwrap();
    assert!((fit.slope - slopes["pis"]["slope"].as_f64().unwrap()).abs() < 1e-12);
    let r = scratch("report");
    let o = mll(&["report", "--input", a.to_str().unwrap(), "--out", r.to_str().unwrap()]);
    assert!(o.status.success());
    let md = std::fs::read_to_string(r.join("report.md")).unwrap();
    assert!(md.contains("Pis error slope"));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), md);
}

#[test]
fn single_run_commands_write_their_files() {
    let d = scratch("single");
    assert!(run_tiny("nls", &d, &[]).status.success());
    assert!(run_tiny("evolve", &d, &[]).status.success());
    assert!(run_tiny("wkb", &d, &[]).status.success());
    for f in ["nls.csv", "envelope.csv", "diagnostics.csv", "final.snap", "wkb.json", "layers.csv"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let (v, t) = load_snapshot(&d.join("final.snap")).unwrap();
    assert_eq!(v.eps, 0.2);
    assert!((t - 1.0).abs() < 1e-12);
    let diag = std::fs::read_to_string(d.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().count(), 1 + 6);
}

#[test]
fn exit_codes() {
    let d = scratch("codes");
    assert_eq!(run_tiny("sweep", &d, &["bogus=1"]).status.code(), Some(2));
    assert_eq!(run_tiny("sweep", &d, &["eps_list=[0.05,0.1]"]).status.code(), Some(2));
    assert_eq!(run_tiny("evolve", &d, &["blowup_bound=1e-9"]).status.code(), Some(3));
    let o = mll(&["report", "--input", d.join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = d.join("bad.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    let o = mll(&["wkb", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_then_overrides() {
    let d = scratch("config");
    let path = d.join("c.json");
    std::fs::write(&path, r#"{"preparation": "unprepared", "grid": {"ny": 128}}"#).unwrap();
    let c = ExperimentConfig::load(Some(&path), &["grid.p_max=6".into()]).unwrap();
    assert_eq!(c.preparation, PrepMode::Unprepared);
    assert_eq!((c.grid.ny, c.grid.p_max, c.grid.ly), (128, 6, 64.0));
    let c = ExperimentConfig::load(Some(&path), &["preparation=matched".into()]).unwrap();
    assert_eq!(c.preparation, PrepMode::Matched);
    assert_eq!(c.t_end(0.1), 5.0);
}
