//! End-to-end runs of the `hornlab` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn hornlab(dir: &Path, args: &[&str], threads: Option<&str>) -> i32 {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hornlab"));
    cmd.current_dir(dir).args(args).env_remove("HORNLAB_THREADS");
    if let Some(t) = threads {
        cmd.env("HORNLAB_THREADS", t);
    }
    cmd.output().expect("binary runs").status.code().expect("exit code")
}

fn workspace(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), config).unwrap();
    dir
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn modes_with_defaults() {
    let dir = workspace("{}");
    assert_eq!(hornlab(dir.path(), &["modes", "--config", "run.json", "--out", "out"], None), 0);
    let out = dir.path().join("out");
    let text = fs::read_to_string(out.join("modes.csv")).unwrap();
    assert!(text.starts_with("r,s,sign,log_mag,log_deriv\n") && text.ends_with('\n'));
    let r = csv_column(&out.join("modes.csv"), "r");
    let log_mag = csv_column(&out.join("modes.csv"), "log_mag");
    assert_eq!(r.len(), 64);
    // Rows run from r_top down to r_min; log_mag decreases toward r_min.
    assert!(r.windows(2).all(|w| w[1] < w[0]));
    assert!(log_mag.windows(2).all(|w| w[1] < w[0]));
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["stage"], "done");
    let fit = &m["results"]["decay_fit"];
    let slope = fit["fit"]["slope"].as_f64().unwrap();
    let bracket: Vec<f64> = fit["bracket"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(bracket[0] <= slope && slope <= bracket[1]);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["versions"]["hornlab"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config"]["mode"]["i"], 1);
}

#[test]
fn constant_state_has_zero_frequency() {
    let dir = workspace(r#"{"freq": {"state": "constant", "r_grid": {"lo": 0.05, "hi": 1.0, "points": 12}}}"#);
    assert_eq!(hornlab(dir.path(), &["freq-elliptic", "--config", "run.json", "--out", "out"], None), 0);
    let u = csv_column(&dir.path().join("out/freq_elliptic.csv"), "U");
    assert_eq!(u.len(), 12);
    assert!(u.iter().all(|&v| v == 0.0));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/freq_elliptic.json")).unwrap()).unwrap();
    assert_eq!(report["U_C"].as_f64().unwrap(), 0.0);
}

#[test]
fn demo_counterexample_summary() {
    let dir = workspace("{}");
    assert_eq!(hornlab(dir.path(), &["demo-counterexample", "--config", "run.json", "--out", "out"], None), 0);
    let s: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/demo_counterexample.json")).unwrap()).unwrap();
    assert!(s["decay_slope"].as_f64().unwrap() < 0.0);
    assert!(s["elliptic"]["identity_defect"].as_f64().unwrap() <= s["thresholds"]["log_i_identity"].as_f64().unwrap());
    assert!(s["parabolic"]["ID_defect"].as_f64().unwrap() <= s["thresholds"]["id_relation"].as_f64().unwrap());
    assert_eq!(s["passed"], true);
}

#[test]
fn csv_output_is_bit_identical_across_runs() {
    let dir = workspace(r#"{"eigs": {"count": 10}}"#);
    for (out, threads) in [("a", None), ("b", Some("1")), ("c", Some("3"))] {
        assert_eq!(hornlab(dir.path(), &["eigs", "--config", "run.json", "--out", out], threads), 0);
        assert_eq!(hornlab(dir.path(), &["heat", "--config", "run.json", "--out", out], threads), 0);
    }
    for name in ["eigs.csv", "heat.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        for other in ["b", "c"] {
            assert_eq!(a, fs::read(dir.path().join(other).join(name)).unwrap(), "{name} differs in {other}");
        }
    }
    assert_eq!(manifest(&dir.path().join("b"))["threads"], 1);
    assert_eq!(manifest(&dir.path().join("c"))["threads"], 3);
    let heat = fs::read_to_string(dir.path().join("a/heat.csv")).unwrap();
    assert!(heat.starts_with("r,t,sign,log_mag\n"));
}

#[test]
fn overrides_reach_the_pipeline() {
    let dir = workspace(r#"{"eigs": {"count": 3}}"#);
    let args = ["eigs", "--config", "run.json", "--out", "out", "--set", "eigs.count=5", "--set", "eigs.r_out=3.5"];
    assert_eq!(hornlab(dir.path(), &args, None), 0);
    let nu = csv_column(&dir.path().join("out/eigs.csv"), "nu");
    assert_eq!(nu.len(), 5);
    assert_eq!(manifest(&dir.path().join("out"))["config"]["eigs"]["r_out"], 3.5);
}

#[test]
fn output_directory_from_config() {
    let dir = workspace(r#"{"output": "from-config"}"#);
    assert_eq!(hornlab(dir.path(), &["eigs", "--config", "run.json"], None), 0);
    assert!(dir.path().join("from-config/eigs.csv").exists());
}

#[test]
fn config_errors_exit_2_with_a_manifest() {
    let dir = workspace(r#"{"mode": {"mu": -1}}"#);
    assert_eq!(hornlab(dir.path(), &["modes", "--config", "run.json", "--out", "out"], None), 2);
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["status"], "config_error");
    assert_eq!(m["stage"], "config");
    assert_eq!(m["config"]["mode"]["mu"], -1);

    assert_eq!(hornlab(dir.path(), &["modes", "--config", "missing.json", "--out", "out2"], None), 2);
    assert_eq!(manifest(&dir.path().join("out2"))["config"], Value::Null);

    let args = ["modes", "--config", "run.json", "--out", "out3", "--set", "mode.mu=1", "--set", "mode.typo=1"];
    assert_eq!(hornlab(dir.path(), &args, None), 2);
    assert_eq!(hornlab(dir.path(), &["modes", "--config", "run.json", "--out", "out4", "--set", "mode.mu=1"], Some("0")), 2);
    assert_eq!(hornlab(dir.path(), &["nonsense", "--config", "run.json"], None), 2);
}

#[test]
fn numerical_failures_exit_3_naming_the_stage() {
    // The tip region of the default mode ends near r = 0.137.
    let dir = workspace(r#"{"mode": {"r_min": 0.5}}"#);
    assert_eq!(hornlab(dir.path(), &["modes", "--config", "run.json", "--out", "out"], None), 3);
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["status"], "numerical_failure");
    assert_eq!(m["stage"], "profile");
    assert!(m["error"].as_str().unwrap().contains("domain"));
}

#[test]
fn bound_check_failures_exit_4() {
    // Past R ≈ 0.3 the Gaussian weight reaches the cap and log D stops being linear in
    // R^{-2ε}, so the lower-bound fit residual exceeds its limit.
    let dir = workspace(r#"{"freq": {"R_grid": {"lo": 0.1, "hi": 1.0, "points": 16}}}"#);
    assert_eq!(hornlab(dir.path(), &["freq-parabolic", "--config", "run.json", "--out", "out"], None), 4);
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["status"], "bound_check_failure");
    assert_eq!(m["stage"], "bound-checks");
    let failed: Vec<&str> =
        m["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(failed, ["d_lower_residual"]);
    // Artifacts are still written.
    assert!(dir.path().join("out/freq_parabolic.csv").exists());
}

#[test]
fn every_command_runs_with_defaults() {
    let dir = workspace("{}");
    for cmd in ["modes", "eigs", "freq-elliptic", "freq-parabolic", "heat", "analyticity", "demo-counterexample"] {
        assert_eq!(hornlab(dir.path(), &[cmd, "--config", "run.json", "--out", cmd], None), 0, "{cmd}");
        let m = manifest(&dir.path().join(cmd));
        assert_eq!(m["command"], cmd);
        for f in m["files"].as_array().unwrap() {
            assert!(dir.path().join(cmd).join(f.as_str().unwrap()).exists());
        }
    }
    let a: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analyticity/analyticity.json")).unwrap()).unwrap();
    assert_eq!(a["coefficients"].as_array().unwrap().len(), 17);
    for key in ["t0", "r0", "kmax", "fitted_radius"] {
        assert!(a.get(key).is_some());
    }
}
