//! End-to-end tests of the `ems` binary: every subcommand against a small
//! ten-step configuration, the artifact set each one writes, the manifest,
//! and the exit-code contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .canonicalize()
        .unwrap()
}

/// Ten 60 s steps at 0.35 scale: light enough that every subcommand runs in
/// well under a second, still exercising the full artifact pipeline.
fn write_config(dir: &Path, horizon_extra: &str) -> PathBuf {
    let data = data_dir();
    let text = format!(
        r#"[profile]
path = "{data}/cbdc_synthetic.csv"
scale = 0.35
resample_dt = 60.0

[battery]
ocv_curve = "{data}/ocv_curve.csv"
r0_curve = "{data}/r0_curve.csv"

[stack]
count = 1

[horizon]
dt = 60.0
mode = "csc"
{horizon_extra}
[solver]
abs_gap_tol = 0.05
rel_gap_tol = 1e-4

[dp]
soc_step_pct = 0.5
fc_power_step_kw = 10.0

[output]
dir = "{out}"
"#,
        data = data.display(),
        out = dir.join("runs").display(),
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn ems(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ems"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

/// Run directories under `root` whose name contains `-{kind}`, sorted.
fn run_dirs(root: &Path, kind: &str) -> Vec<PathBuf> {
    let needle = format!("-{kind}");
    let mut v: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().contains(&needle))
        .collect();
    v.sort();
    v
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn profile_writes_artifacts_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = ems(&cfg, &["profile"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let dirs = run_dirs(&tmp.path().join("runs"), "profile");
    assert_eq!(dirs.len(), 1);
    let dir = &dirs[0];

    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["command"], "profile");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    let digest = format!("{:x}", Sha256::digest(fs::read(&cfg).unwrap()));
    assert_eq!(manifest["config_sha256"], digest.as_str());

    let csv = fs::read_to_string(dir.join("profile.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t_s,demand_kw");
    assert_eq!(lines.len(), 11, "header plus ten steps");

    let summary = json(&dir.join("profile.json"));
    assert_eq!(summary["steps"], 10);
    assert_eq!(summary["dt_s"], 60.0);
    assert!(summary["max_kw"].as_f64().unwrap() > summary["min_kw"].as_f64().unwrap());
}

#[test]
fn fit_reports_quality_and_gates_on_bad_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let fuel = data_dir().join("fc_fuel_curve.csv");
    let out = ems(&cfg, &["fit", "--fuel-samples", fuel.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = &run_dirs(&tmp.path().join("runs"), "fit")[0];
    let fit = json(&dir.join("fit.json"));
    assert!(fit["battery"]["r_squared_current"].as_f64().unwrap() >= 0.98);
    assert!(fit["fuel"]["r_squared"].as_f64().unwrap() >= 0.98);

    // samples with no quadratic structure must fail the 0.98 floor
    let junk = tmp.path().join("junk.csv");
    let mut text = String::from("p_kw,mdot_kg_per_s\n");
    for k in 0..10 {
        let m = if k % 2 == 0 { 1e-3 } else { 1e-7 };
        text.push_str(&format!("{}.0,{m}\n", 15 + 5 * k));
    }
    fs::write(&junk, text).unwrap();
    let out = ems(&cfg, &["fit", "--fuel-samples", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn optimize_writes_solution_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = ems(&cfg, &["optimize", "--export-mps"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = &run_dirs(&tmp.path().join("runs"), "optimize")[0];
    let solve = json(&dir.join("solve.json"));
    let status = solve["status"].as_str().unwrap();
    assert!(status == "optimal" || status == "gap_limit", "{status}");
    assert!(solve["objective"].as_f64().unwrap() >= 0.0);
    assert_eq!(solve["variables"], 110);
    assert_eq!(solve["binaries"], 40);

    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert!(lines[0].starts_with("t_s,demand_kw,p_fc0_kw"));
    assert_eq!(lines.len(), 11);

    let costs = json(&dir.join("costs.json"));
    let total = costs["total"].as_f64().unwrap();
    let sum: f64 = [
        "battery_degradation",
        "h2_cost",
        "fc_idling",
        "fc_high_load",
        "fc_load_change",
        "fc_on_off",
    ]
    .iter()
    .map(|k| costs[*k].as_f64().unwrap())
    .sum();
    assert!((total - sum).abs() < 1e-9);

    let mps = fs::read_to_string(dir.join("problem.mps")).unwrap();
    assert!(mps.contains("QMATRIX"));
    assert!(mps.contains("INTORG"));

    let schedule = json(&dir.join("schedule.json"));
    assert_eq!(schedule["steps"].as_array().unwrap().len(), 10);

    // the mode override must parse and solve as well
    let out = ems(&cfg, &["optimize", "--mode", "isc"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn dp_benchmark_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = ems(&cfg, &["dp", "--dump-values"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = &run_dirs(&tmp.path().join("runs"), "dp")[0];
    let dp = json(&dir.join("dp.json"));
    let costs = json(&dir.join("costs.json"));
    assert_eq!(dp["rollout_total"], costs["total"]);
    assert_eq!(dp["steps"], 10);
    assert!(dp["stage_evals"].as_u64().unwrap() > 0);

    let values = fs::read_to_string(dir.join("values.csv")).unwrap();
    assert!(values.lines().count() > 1);
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 11);
}

#[test]
fn simulate_closed_loop_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = ems(&cfg, &["simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = &run_dirs(&tmp.path().join("runs"), "simulate")[0];
    let mpc = json(&dir.join("mpc.json"));
    assert_eq!(mpc["windows"], 10, "one shrinking window per committed block");
    let soc = mpc["soc_final"].as_f64().unwrap();
    assert!((47.0..=53.0).contains(&soc), "terminal SOC {soc}");
    assert!(mpc["truth_costs"]["total"].as_f64().unwrap() >= 0.0);
    assert_eq!(mpc["solves"].as_array().unwrap().len(), 10);

    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 11);
}

#[test]
fn compare_runs_both_lanes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = ems(&cfg, &["compare"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("category"), "{stdout}");
    assert!(stdout.contains("total"), "{stdout}");

    let dir = &run_dirs(&tmp.path().join("runs"), "compare")[0];
    assert!(dir.join("trace_oneshot.csv").exists());
    assert!(dir.join("trace_benchmark.csv").exists());
    let report = json(&dir.join("compare.json"));
    assert!(report["speedup"].as_f64().unwrap() > 0.0);
    assert!(report["benchmark_value_initial"].as_f64().unwrap() >= 0.0);
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();

    // malformed document
    let broken = tmp.path().join("broken.toml");
    fs::write(&broken, "not = [valid").unwrap();
    let out = ems(&broken, &["optimize"]);
    assert_eq!(out.status.code(), Some(2));

    // config pointing at a missing cycle file
    let cfg = write_config(tmp.path(), "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("cbdc_synthetic.csv", "no_such_file.csv");
    let missing = tmp.path().join("missing.toml");
    fs::write(&missing, text).unwrap();
    let out = ems(&missing, &["optimize"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // terminal SOC window the battery cannot reach in ten minutes
    let infeasible = write_config(
        &{
            let d = tmp.path().join("inf");
            fs::create_dir(&d).unwrap();
            d
        },
        "soc_final_min = 89.0\nsoc_final_max = 90.0\n",
    );
    let out = ems(&infeasible, &["optimize"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    // clap usage errors share the validation exit code
    let out = ems(&cfg, &["optimize", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_flag_overrides_root_and_collisions_get_suffixes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let other = tmp.path().join("elsewhere");
    for _ in 0..2 {
        let out = Command::new(env!("CARGO_BIN_EXE_ems"))
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&other)
            .arg("profile")
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!tmp.path().join("runs").exists(), "configured root must be bypassed");
    let dirs = run_dirs(&other, "profile");
    assert_eq!(dirs.len(), 2, "{dirs:?}");
    assert!(dirs.iter().all(|d| d.join("manifest.json").exists()));
}
