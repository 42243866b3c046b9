use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcli_lab::bounds::lb_strongly_convex;
use pcli_lab::harness::report::CSV_HEADER;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pcli-lab"));
    c.env("PCLI_LAB_THREADS", "1");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn polybound_prints_bound_and_optimum() {
    let o = run(&["polybound", "--k", "10", "--kappa", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let above = rows.iter().find(|r| r[1] == "chebyshev/above-lb").unwrap();
    let bound: f64 = above[5].parse().unwrap();
    assert_eq!(bound, lb_strongly_convex(10, 100.0).unwrap());
    let measured: f64 = above[4].parse().unwrap();
    // 2ρ^10 / (1 + ρ^20), ρ = 9/11
    let rho: f64 = 9.0 / 11.0;
    let want = 2.0 * rho.powi(10) / (1.0 + rho.powi(20));
    assert!((measured - want).abs() < 1e-6 * want);
}

#[test]
fn shipped_default_config_verifies_lower_bound() {
    let cfg = configs().join("default.json");
    let o = run(&["verify-lb-sc", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(stdout(&o).lines().count(), 1 + 8 * 3 * 61);
}

#[test]
fn missing_config_exits_2() {
    let o = run(&["verify-lb-sc", "--config", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
}

#[test]
fn malformed_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("noversion.json", r#"{"experiment": "polybound"}"#),
        ("badversion.json", r#"{"config_version": 9}"#),
        ("typo.json", r#"{"config_version": 1, "kappas": [1]}"#),
        (
            "badexp.json",
            r#"{"config_version": 1, "experiment": "nope"}"#,
        ),
        ("badeps.json", r#"{"config_version": 1, "eps": -1}"#),
        ("notjson.json", "{"),
    ] {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        let o = run(&["run", "--config", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}");
    }
    assert_eq!(run(&["polybound", "--kappa", "abc"]).status.code(), Some(2));
    assert_eq!(run(&["polybound", "--k", "5:1"]).status.code(), Some(2));
    assert_eq!(run(&["polybound", "--unknown"]).status.code(), Some(2));
    assert_eq!(
        run(&["rate-fit", "--kappa", "10,20"]).status.code(),
        Some(2)
    );
}

#[test]
fn failed_check_exits_1() {
    // κ close to 1 bends the log-log line away from its nominal slope
    let o = run(&["rate-fit", "--kappa", "1.001,10,1000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains(",false"));
}

#[test]
fn run_uses_experiment_from_file_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out_file = dir.path().join("from_file.csv");
    let out_flag = dir.path().join("from_flag.csv");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"config_version": 1, "experiment": "polybound", "kappa_list": [4], "k_list": [1, 2], "output_path": {:?}}}"#,
            out_file.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(&out_file).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.starts_with("polybound,") && l.contains(",4,")));

    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--kappa",
        "9",
        "--out",
        out_flag.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out_flag).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",9,")));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"config_version": 1, "replicates": 500, "k_list": [1, 3]}"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = bin()
            .env("PCLI_LAB_THREADS", threads)
            .args([
                "stochastic",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "3",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    bin()
        .args([
            "stochastic",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "4",
            "--out",
            c.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn csv_rows_are_sorted_and_pass_matches_margin() {
    let o = run(&["restart-demo", "--kappa", "25,100"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    let keys: Vec<(String, f64, usize)> = rows
        .iter()
        .map(|r| {
            (
                r[1].clone(),
                r[2].parse().unwrap(),
                r[3].parse().unwrap_or(0),
            )
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    assert_eq!(keys, sorted);
    for r in &rows {
        assert_eq!(r[7], "true");
        let margin: f64 = r[6].parse().unwrap();
        assert!(margin >= -0.5e-6);
    }
}
