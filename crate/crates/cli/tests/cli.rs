use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal};

fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    path.to_string_lossy().into_owned()
}

fn xos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xos"))
        .args(args)
        .env_remove("XOS_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--format=json");
    let out = xos(&all);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&stdout(&out)).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn check_exit_codes() {
    for (file, code) in [
        ("sharp.toml", 0),
        ("derivatives.toml", 0),
        ("empty.toml", 0),
        ("stochastic.toml", 1),
        ("quadratic.toml", 2),
    ] {
        let out = xos(&["check", &fixture(file)]);
        assert_eq!(out.status.code(), Some(code), "{file}");
    }
    let v = json(&["check", &fixture("derivatives.toml")]);
    assert_eq!(v["summary"][0]["class"], "A2_Contractive");
}

#[test]
fn check_lists_column_violations() {
    let out = xos(&["check", &fixture("stochastic.toml")]);
    let text = stdout(&out);
    assert!(text.contains("column 0 sums to 1"), "{text}");
    assert!(text.contains("column 1 sums to 1"), "{text}");
}

#[test]
fn invalid_system_is_not_solved() {
    let out = xos(&["solve", &fixture("stochastic.toml")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn solve_reproduces_two_firm_table() {
    let expected = [(50.0, 100.0), (0.0, 100.0), (0.0, 50.0)];
    for file in ["no_xos.toml", "stock_xos.toml", "bond_xos.toml"] {
        let out = xos(&["solve", &fixture(file), "--format=csv"]);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout(&out);
        let first = text.split("\n\n").next().unwrap();
        let mut reader = csv::Reader::from_reader(first.as_bytes());
        let headers = reader.headers().unwrap().clone();
        assert_eq!(
            headers.iter().collect::<Vec<_>>(),
            ["scenario", "firm", "s", "r1", "balance_residual", "iterations"]
        );
        let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 6);
        for (i, row) in rows.iter().enumerate() {
            let (s, r) = expected[i / 2];
            assert_eq!(&row[0], format!("row{}", i / 2 + 1));
            assert_eq!(&row[1], (i % 2).to_string());
            // printed to 12 significant digits, these equal the table entries
            assert_eq!(row[2].parse::<f64>().unwrap(), s, "{file} {row:?}");
            assert_eq!(row[3].parse::<f64>().unwrap(), r, "{file} {row:?}");
        }
    }
}

#[test]
fn solve_sharp_example_and_zero_scenario() {
    let v = json(&["solve", &fixture("sharp.toml")]);
    for row in v["equilibria"].as_array().unwrap() {
        assert!((num(&row["s"]) - 2.0).abs() < 1e-9);
        assert_eq!(num(&row["r1"]), 0.0);
    }
    let v = json(&["solve", &fixture("derivatives.toml")]);
    let zero: Vec<&Value> = v["equilibria"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["scenario"] == "zero")
        .collect();
    assert_eq!(zero.len(), 2);
    for row in zero {
        for key in ["s", "r1", "r2", "r3"] {
            assert_eq!(num(&row[key]), 0.0);
        }
    }
}

#[test]
fn solver_failure_exits_three() {
    let out = xos(&["solve", &fixture("stock_xos.toml"), "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty(), "partial results must be suppressed");
}

#[test]
fn scan_counts() {
    let v = json(&["scan", &fixture("quadratic.toml"), "--starts", "32"]);
    assert_eq!(v["scan"][0]["equilibria"], 2);
    assert_eq!(v["scan"][0]["class"], "Unknown");
    let blocks = v["equilibria"].as_array().unwrap();
    assert!(blocks
        .iter()
        .any(|r| (num(&r["r1"]) - 1.0).abs() < 1e-8 && (num(&r["s"]) - 0.8).abs() < 1e-8));
    for r in blocks {
        assert!(num(&r["balance_residual"]).abs() < 1e-8);
    }

    let v = json(&["scan", &fixture("derivatives.toml")]);
    for row in v["scan"].as_array().unwrap() {
        assert_eq!(row["equilibria"], 1);
    }

    let v = json(&["scan", &fixture("empty.toml")]);
    assert_eq!(v["scan"][0]["equilibria"], 1);
    let s: Vec<f64> = v["equilibria"].as_array().unwrap().iter().map(|r| num(&r["s"])).collect();
    assert_eq!(s, [3.0, 2.0, 7.0]);
}

#[test]
fn metrics_leverage_columns() {
    let col = |file: &str| -> Vec<f64> {
        json(&["metrics", &fixture(file)])["metrics"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| num(&r["L"]))
            .collect()
    };
    for (file, want) in [
        ("no_xos.toml", [0.0, 0.0, 0.0]),
        ("stock_xos.toml", [0.2, 0.0, 0.0]),
        ("bond_xos.toml", [0.5, 1.0, 1.0]),
    ] {
        let got = col(file);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-9, "{file}: {got:?}");
        }
    }
    let v = json(&["metrics", &fixture("sharp.toml")]);
    let row = &v["metrics"][0];
    assert!((num(&row["L"]) - 1.0).abs() < 1e-9);
    assert_eq!(num(&row["L_max"]), 1.0);
}

#[test]
fn metrics_report_zero_base_per_scenario() {
    let v = json(&["metrics", &fixture("derivatives.toml")]);
    let rows = v["metrics"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["L"].is_number());
    assert!(rows[1]["L"].is_number());
    assert!(rows[2]["L"].is_null());
    assert!(rows[2]["error"].as_str().unwrap().contains("zero"));
    assert_eq!(rows[0]["error"], "");
}

fn call(spot: f64, strike: f64, vol: f64, rate: f64, t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let d1 = ((spot / strike).ln() + (rate + vol * vol / 2.0) * t) / (vol * t.sqrt());
    let d2 = d1 - vol * t.sqrt();
    spot * n.cdf(d1) - strike * (-rate * t).exp() * n.cdf(d2)
}

fn equity_price(v: &Value) -> (f64, f64) {
    let row = v["prices"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["claim"] == "s")
        .unwrap();
    (num(&row["mean"]), num(&row["std_error"]))
}

#[test]
fn price_zero_vol_is_discounted_payoff() {
    let v = json(&["price", &fixture("merton_zero_vol.toml"), "--paths", "10"]);
    let (mean, se) = equity_price(&v);
    let expected = 100.0 - 100.0 * (-0.05f64).exp();
    assert!((mean - expected).abs() < 1e-9, "{mean} vs {expected}");
    assert!(se.abs() < 1e-9);
}

#[test]
fn price_merton_matches_closed_form() {
    let v = json(&["price", &fixture("merton.toml"), "--paths", "100000"]);
    let (mean, se) = equity_price(&v);
    let exact = call(100.0, 100.0, 0.2, 0.05, 1.0);
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} +- {se} vs {exact}");
}

#[test]
fn price_reproducible_across_thread_counts() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_xos"))
            .args(["price", &fixture("derivatives.toml"), "--paths", "5000", "--reproducible", "--format=csv"])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert_eq!(one, run("8"));
}

#[test]
fn price_preconditions() {
    assert_eq!(xos(&["price", &fixture("quadratic.toml")]).status.code(), Some(2));
    assert_eq!(xos(&["price", &fixture("sharp.toml")]).status.code(), Some(1));
}

#[test]
fn price_writes_plot_data() {
    let path = std::env::temp_dir().join(format!("xos-plot-{}.csv", std::process::id()));
    let p = path.to_string_lossy().into_owned();
    let out = xos(&["price", &fixture("derivatives.toml"), "--paths", "200", "--plot-data", &p]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,claim,firm,price,std_error");
    // three seniorities and equity for two firms
    assert_eq!(lines.len(), 1 + 8);
    assert!(lines[1].starts_with("0,r1,0,"));
    assert!(lines[8].starts_with("7,s,1,"));
}

#[test]
fn reads_standard_input() {
    let text = std::fs::read_to_string(fixture("sharp.toml")).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_xos"))
        .args(["solve", "-", "--format=csv"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, xos(&["solve", &fixture("sharp.toml"), "--format=csv"]).stdout);
}

#[test]
fn parse_errors_exit_one_with_position() {
    let path = std::env::temp_dir().join(format!("xos-bad-{}.toml", std::process::id()));
    let text = std::fs::read_to_string(fixture("sharp.toml")).unwrap().replace("assets = 2", "assets = 2\nwidth = 3");
    std::fs::write(&path, text).unwrap();
    let out = xos(&["check", &path.to_string_lossy()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parse error") && err.contains("line"), "{err}");
    assert_eq!(xos(&["check", "/nonexistent/file.toml"]).status.code(), Some(1));
}

#[test]
fn parallel_output_matches_sequential() {
    for cmd in ["solve", "metrics", "scan"] {
        let a = xos(&[cmd, &fixture("derivatives.toml")]);
        let b = xos(&[cmd, &fixture("derivatives.toml"), "--parallel"]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn logging_goes_to_stderr() {
    let quiet = xos(&["solve", &fixture("sharp.toml")]);
    let loud = Command::new(env!("CARGO_BIN_EXE_xos"))
        .args(["solve", &fixture("sharp.toml")])
        .env("XOS_LOG", "debug")
        .output()
        .unwrap();
    assert!(quiet.stderr.is_empty());
    assert_eq!(quiet.stdout, loud.stdout);
    let err = String::from_utf8_lossy(&loud.stderr);
    assert!(err.contains("converged") && err.contains("DEBUG"), "{err}");
}
