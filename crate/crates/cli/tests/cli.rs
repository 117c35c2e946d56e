use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_isoblock"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--deterministic")
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn sqrt_ode_simulate_reaches_four() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "simulate", "model = sqrt-ode\nx0 = 1\nt_end = 2\n", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(d.path(), "simulate.json");
    let end = v["result"]["endpoint"][0].as_f64().unwrap();
    assert!((end - 4.0).abs() < 1e-9, "{end}");
    let csv = fs::read_to_string(d.path().join("out/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x_1\n"));
    assert_eq!(csv.lines().count(), 2002);
}

#[test]
fn rd_simulate_from_equilibrium_stays() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "simulate", "model = rd\nn = 31\nx0 = equilibrium\nt_end = 1\n", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(d.path(), "simulate.json");
    let x0: Vec<f64> = serde_json::from_value(v["result"]["x0"].clone()).unwrap();
    let end: Vec<f64> = serde_json::from_value(v["result"]["endpoint"].clone()).unwrap();
    let dev = x0.iter().zip(&end).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-2, "{dev}");
    assert!(v["result"]["energy"]["trace"].as_array().unwrap().len() <= 1001);
    let header = fs::read_to_string(d.path().join("out/trajectory.csv")).unwrap();
    assert!(header.lines().next().unwrap().ends_with(",E"));
}

#[test]
fn missing_model_is_config_error_without_outputs() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "simulate", "dt = 0.1\n", &[]);
    assert_eq!(r.code, 2);
    assert!(!d.path().join("out").exists());
}

#[test]
fn malformed_configs_exit_two() {
    let d = tempfile::tempdir().unwrap();
    for cfg in ["model = saddle\nbogus = 1\n", "model = saddle\ndt = -1\n", "model = rd\nomega = 100\n", "model = rd\nn = 2\n"] {
        let r = run(d.path(), "simulate", cfg, &[]);
        assert_eq!(r.code, 2, "{cfg}: {}", r.stderr);
    }
    let r = run(d.path(), "verify", "model = rd\nsuite = nope\n", &[]);
    assert_eq!(r.code, 2);
    assert!(!d.path().join("out").exists());
}

#[test]
fn clap_usage_error_exits_two() {
    let out = Command::new(env!("CARGO_BIN_EXE_isoblock")).arg("simulate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn saddle_block_verifies() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "block", "model = saddle\n", &[]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let v = json(d.path(), "block.json");
    assert_eq!(v["result"]["verification"]["pass"], Value::Bool(true));
    let ver = &v["result"]["verification"];
    assert!(ver["egress"].as_u64().unwrap() > 0 && ver["ingress"].as_u64().unwrap() > 0);
    assert!(d.path().join("out/block.csv").exists());
}

#[test]
fn rd_block_has_no_egress() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "block", "model = rd\nk = 1\nsign = 1\n", &[]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let v = json(d.path(), "block.json");
    assert_eq!(v["result"]["verification"]["egress"].as_u64(), Some(0));
}

#[test]
fn rd_neighborhood_with_extra_equilibrium_exits_four() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "block", "model = rd\nk = 1\nregion_radius = 0.1\n", &[]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(!d.path().join("out").exists());
}

#[test]
fn k5_expected_failure() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "verify", "model = sqrt-ode\nsuite = k5\nexpect_fail = true\n", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(d.path(), "verify-k5.json");
    assert_eq!(v["result"]["expected_failure"], Value::Bool(true));
    let r = run(d.path(), "verify", "model = sqrt-ode\nsuite = k5\n", &[]);
    assert_eq!(r.code, 1);
}

#[test]
fn ordering_suite_passes() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "verify", "model = rd\nk_max = 3\n", &["--suite", "ordering"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn degenerate_comparison_exits_five() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "verify", "model = rd\nsuite = comparison\nu0 = zero\nv0 = zero\n", &[]);
    assert_eq!(r.code, 5, "{}", r.stderr);
}

#[test]
fn suite_model_mismatch_exits_five() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "verify", "model = saddle\nsuite = k5\n", &[]);
    assert_eq!(r.code, 5);
}

#[test]
fn equilibria_lists_both_signs() {
    let d = tempfile::tempdir().unwrap();
    let r = run(d.path(), "equilibria", "model = rd\nn = 63\nk_max = 3\n", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(d.path(), "equilibria.json");
    assert_eq!(v["result"]["equilibria"].as_array().unwrap().len(), 6);
}

#[test]
fn floats_carry_seventeen_digits() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), "simulate", "model = sqrt-ode\nt_end = 0.5\n", &[]);
    let text = fs::read_to_string(d.path().join("out/simulate.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let dt = v["result"]["dt"].as_f64().unwrap();
    assert_eq!(dt, 1e-3);
    assert!(text.contains("1.0000000000000000e-3"));
}

#[test]
fn deterministic_reruns_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let cases = [
        ("simulate", "model = rd\nn = 31\nx0 = random\nstrategy = random:0.1\nt_end = 0.5\nseed = 3\n", "simulate.json"),
        ("equilibria", "model = rd\nn = 31\n", "equilibria.json"),
        ("verify", "model = planar\nsuite = filippov\npairs = 20\n", "verify-filippov.json"),
        ("classify", "model = saddle\ngrid_n = 41\npoints = 0,0.28; 0.3,0\n", "classify.json"),
    ];
    for (sub, cfg, file) in cases {
        run(d.path(), sub, cfg, &[]);
        let a = fs::read(d.path().join("out").join(file)).unwrap();
        run(d.path(), sub, cfg, &[]);
        let b = fs::read(d.path().join("out").join(file)).unwrap();
        assert_eq!(a, b, "{sub}");
        assert!(!String::from_utf8_lossy(&a).contains("generated_at"));
    }
}
