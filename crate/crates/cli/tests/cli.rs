use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use repmarket_cli::commands::{NeOutput, VerifyReport};
use repmarket_cli::summary::RunSummary;
use repmarket_cli::trace::{read_trace_file, TraceTable};
use repmarket_core::{simulate, ScenarioConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_repmarket"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ne(args: &[&str]) -> NeOutput {
    let out = run(&[&["ne"], args].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn ne_unlimited_two_sellers() {
    let out = ne(&["--scenario", "unlimited", "--r", "0.9,0.3"]);
    assert!((out.prices[0] - 0.29).abs() < 1e-12);
    assert_eq!(out.prices[1], 0.1);
    assert_eq!(out.profits[1], 0.0);
}

#[test]
fn ne_limited_one_well_separated() {
    let out = ne(&["--scenario", "limited-one", "--r", "0.9,0.09,0.009"]);
    assert!((out.prices[0] - 0.9f64.sqrt()).abs() < 1e-12);
    assert!((out.prices[1] - 0.3).abs() < 1e-12);
    // ρr is below cost for the third seller
    assert_eq!(out.prices[2], 0.1);
}

#[test]
fn ne_limited_multi_single_seller_at_ceiling() {
    let out = ne(&["--scenario", "limited-multi", "--r", "0.5"]);
    assert!((out.prices[0] - 10.0 / 3.0).abs() < 1e-12);
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(
        run(&["ne", "--scenario", "unlimited", "--r", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["ne", "--scenario", "sideways", "--r", "0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["ne", "--scenario", "limited-one", "--r", "0.5,0.4", "--b", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["ne", "--scenario", "unlimited"]).status.code(), Some(2));
}

#[test]
fn fig3_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let cfg = config("fig3.toml");
    let status = bin()
        .env("MARKET_LOG", "info")
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let run_dir = out.join("fig3");
    for f in ["trace.csv", "summary.json", "reputation.csv", "price.csv"] {
        assert!(run_dir.join(f).is_file(), "{f}");
    }

    let summary: RunSummary =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.leading_seller, 3);
    assert!(summary.stable_reputations[2] > 0.99);
    assert_eq!(summary.regimes.len(), 500);

    // the file holds exactly what the library produces
    let table = read_trace_file(&run_dir.join("trace.csv")).unwrap();
    let trace = simulate(&ScenarioConfig::from_path(&cfg).unwrap()).unwrap();
    assert_eq!(table, TraceTable::from(&trace));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig7.toml");
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let st = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--horizon",
            "60",
        ])
        .status;
        assert!(st.success());
    }
    let read = |n: &str| std::fs::read(dir.path().join(n).join("fig7/trace.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let other = dir.path().join("c");
    run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--horizon",
        "60",
        "--seed",
        "99",
    ]);
    assert_ne!(read("a"), std::fs::read(other.join("fig7/trace.csv")).unwrap());
}

#[test]
fn sweep_runs_configs_side_by_side() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let a = config("fig3.toml");
    let b = config("fig4.toml");
    let st = run(&[
        "simulate",
        "--config",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
        "--horizon",
        "50",
    ])
    .status;
    assert!(st.success());
    assert!(out.join("fig3/trace.csv").is_file() && out.join("fig4/trace.csv").is_file());
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config("fig3.toml"))
        .unwrap()
        .replace("rating = 0.95", "rating = 1.95");
    std::fs::write(&bad, text).unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "simulate",
        "--config",
        config("fig3.toml").to_str().unwrap(),
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sellers[2].rating"));
    assert!(!out.exists());

    std::fs::write(&bad, "[params]\nmarginal_cost = \n").unwrap();
    let res = run(&[
        "simulate",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));
    assert!(!out.exists());
}

#[test]
fn fig6_every_seller_keeps_buyers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert!(run(&[
        "simulate",
        "--config",
        config("fig6.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let table = read_trace_file(&out.join("fig6/trace.csv")).unwrap();
    let late = &table.records[400..];
    for s in 0..6 {
        let served: f64 = late.iter().map(|r| r.transactions[s]).sum();
        assert!(served > 0.0, "seller {} starved", s + 1);
    }
}

#[test]
fn plot_data_from_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert!(run(&[
        "simulate",
        "--config",
        config("fig3.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let panels = dir.path().join("panels");
    let res = run(&[
        "plot-data",
        "--trace",
        out.join("fig3/trace.csv").to_str().unwrap(),
        "--out",
        panels.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = std::fs::read_to_string(panels.join("reputation.csv")).unwrap();
    assert!(text.starts_with("t,seller_id,value\n"));
    let last_r3: f64 = text
        .lines().rfind(|l| l.split(',').nth(1) == Some("3"))
        .and_then(|l| l.split(',').nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!(last_r3 > 0.99);
    assert_eq!(
        std::fs::read_to_string(panels.join("price.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 500 * 6
    );
}

#[test]
fn plot_data_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(
        &empty,
        "t,seller,reputation,price,transactions_slot,profit,regime,arrivals\n",
    )
    .unwrap();
    let panels = dir.path().join("p");
    assert!(run(&[
        "plot-data",
        "--trace",
        empty.to_str().unwrap(),
        "--out",
        panels.to_str().unwrap()
    ])
    .status
    .success());
    for f in ["reputation.csv", "price.csv"] {
        assert_eq!(std::fs::read_to_string(panels.join(f)).unwrap(), "t,seller_id,value\n");
    }

    let corrupt = dir.path().join("corrupt.csv");
    let body = "t,seller,reputation,price,transactions_slot,profit,regime,arrivals\n0,1,0.5,0.2,1,0.3,multi-seller,2\n0,2,0.5,oops,1,0.3,multi-seller,2\n";
    std::fs::write(&corrupt, body).unwrap();
    let res = run(&[
        "plot-data",
        "--trace",
        corrupt.to_str().unwrap(),
        "--out",
        dir.path().join("q").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    let offset = body.find("0,2,").unwrap();
    assert!(
        String::from_utf8_lossy(&res.stderr).contains(&format!("byte {offset}")),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn verify_unlimited_config() {
    let res = run(&[
        "verify",
        "--config",
        config("fig4.toml").to_str().unwrap(),
        "--grid-step",
        "0.001",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let report: VerifyReport = serde_json::from_slice(&res.stdout).unwrap();
    assert!(report.ne.passed);
    let phi = report.joint_optimum.ratio.unwrap();
    let r_max = report.reputations.iter().cloned().fold(0.0, f64::max);
    assert!((phi - (r_max / 0.1 / 10.0).sqrt()).abs() < 2e-4);
}
