use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsd"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn poisson(theta: f64, len: usize) -> Vec<f64> {
    let mut p = vec![(-theta).exp()];
    for k in 1..len {
        p.push(p[k - 1] * theta / k as f64);
    }
    p
}

#[test]
fn divergence_at_zero_is_kl() {
    let v = stdout_json(&lsd(&["divergence", "--theta-g", "2", "--theta-f", "3"]));
    let (g, f) = (poisson(2.0, 60), poisson(3.0, 60));
    let kl: f64 = g.iter().zip(&f).map(|(a, b)| a * (a / b).ln()).sum();
    assert!((v["lsd"].as_f64().unwrap() - kl).abs() < 1e-9);
    assert_eq!(v["exp_a"], 1.0);
}

#[test]
fn negative_gamma_is_accepted() {
    let v = stdout_json(&lsd(&["divergence", "--beta", "0.5", "--gamma", "-0.5"]));
    assert_eq!(v["exp_a"], v["exp_b"]);
}

#[test]
fn estimate_matches_sample_mean_at_zero() {
    let v = stdout_json(&lsd(&["estimate", "--sample", "0,2,2,3,5,6,1,4"]));
    assert!((v["theta_hat"].as_f64().unwrap() - 2.875).abs() < 1e-6);
    assert_eq!(v["converged"], true);
}

#[test]
fn sample_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.txt");
    std::fs::write(&path, "0 2 2\n3,5 6\n1 4\n").unwrap();
    let v = stdout_json(&lsd(&["estimate", "--sample-file", path.to_str().unwrap()]));
    assert!((v["theta_hat"].as_f64().unwrap() - 2.875).abs() < 1e-6);
}

#[test]
fn influence_csv_at_zero_is_centred_identity() {
    let out = lsd(&["influence", "--theta", "4", "--y-max", "10"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,if1,if2"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    for r in rows {
        assert!((r[1] - (r[0] - 4.0)).abs() < 1e-8);
    }
}

#[test]
fn bias_approx_writes_curve() {
    let out = lsd(&["bias-approx", "--beta", "0.3", "--eps-max", "0.05"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("eps,first_order,second_order,adequacy\n"));
    assert_eq!(text.lines().count(), 7);
    let err = stderr_json(&lsd(&["bias-approx", "--eps-max", "0.5"]));
    assert_eq!(err["error"], "usage");
}

#[test]
fn one_and_two_sample_tests() {
    let v = stdout_json(&lsd(&[
        "test",
        "--beta",
        "0.5",
        "--theta0",
        "2",
        "--sample",
        "5,6,4,7,5,6,3,5,6,4",
    ]));
    assert!(v["p_value"].as_f64().unwrap() < 0.01);
    assert_eq!(v["reject_at"]["0.05"], true);
    let v = stdout_json(&lsd(&[
        "test",
        "--sample",
        "1,2,3,2",
        "--sample2",
        "2,1,3,2",
    ]));
    assert!(v["statistic"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["rank"], 1);
}

#[test]
fn errors_are_json_on_stderr() {
    let e = stderr_json(&lsd(&["divergence", "--beta", "-1"]));
    assert_eq!(e["error"], "domain");
    let e = stderr_json(&lsd(&["estimate"]));
    assert_eq!(e["error"], "usage");
    let e = stderr_json(&lsd(&["nonsense"]));
    assert_eq!(e["error"], "usage");
    let e = stderr_json(&lsd(&[
        "estimate",
        "--sample-file",
        "/nonexistent/counts.txt",
    ]));
    assert_eq!(e["error"], "io");
    assert!(e["message"]
        .as_str()
        .unwrap()
        .contains("/nonexistent/counts.txt"));
    let e = stderr_json(&lsd(&["simulate", "--replications", "0"]));
    assert_eq!(e["error"], "usage");
}

#[test]
fn help_exits_cleanly() {
    let out = lsd(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
}

fn simulate_to(path: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    lsd(&args)
}

#[test]
fn simulate_is_reproducible_and_reports_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "json"] {
        let a = dir.path().join(format!("a.{format}"));
        let b = dir.path().join(format!("b.{format}"));
        let args = [
            "--replications",
            "40",
            "--eps",
            "0.1",
            "--beta",
            "0.5",
            "--format",
            format,
        ];
        let out = simulate_to(&a, &args);
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("wall time"));
        assert!(simulate_to(&b, &args).status.success());
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(csv.starts_with("gamma,beta,metric,value,n_fail\n"));
    assert_eq!(csv.lines().count(), 1 + 15 * 2);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"kind": "testing_level", "n": 30, "replications": 7, "seed": 5, "grid_beta": [0.0, 0.5], "grid_gamma": [0.0]}"#,
    )
    .unwrap();
    let out_path = dir.path().join("r.json");
    let out = simulate_to(
        &out_path,
        &[
            "--config",
            config.to_str().unwrap(),
            "--replications",
            "11",
            "--format",
            "json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["config"]["replications"], 11);
    assert_eq!(v["config"]["n"], 30);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["cells"].as_array().unwrap().len(), 2);
    assert_eq!(v["cells"][0]["metrics"][0]["name"], "level");

    std::fs::write(&config, r#"{"replicatoins": 7}"#).unwrap();
    let e = stderr_json(&lsd(&["simulate", "--config", config.to_str().unwrap()]));
    assert_eq!(e["error"], "serialization");
}
