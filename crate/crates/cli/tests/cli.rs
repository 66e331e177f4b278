use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn arqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arqg"))
        .args(args)
        .env_remove("ARQG_SEED")
        .output()
        .expect("binary runs")
}

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/envelope.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

/// Runs a command that must succeed and print a schema-valid envelope.
fn json(args: &[&str]) -> Value {
    let out = arqg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    let errors: Vec<String> = validator().iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{args:?}: {errors:?}\n{v:#}");
    v
}

fn close(v: &Value, want: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= tol
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn analyze_reports_critical_costs() {
    let v = json(&["analyze", "--lambda", "45", "--mu", "60"]);
    let r = &v["result"];
    assert!(close(&r["lower_critical_cost"], 0.025, 1e-12));
    assert!(close(&r["upper_critical_cost"], 1.0 / 30.0, 1e-12));
    assert!(close(&r["rho"], 0.75, 0.0));
    assert!(v.get("seed").is_none());

    let v = json(&["analyze", "--lambda", "45", "--mu", "60", "--tau", "1"]);
    assert_eq!(v["result"]["wait_ar"], 0.0);
    assert!(close(&v["result"]["wait_noar"], 0.025, 1e-12));

    let v = json(&["analyze", "--lambda", "20", "--mu", "60"]);
    assert!(v["result"]["upper_critical_cost"].is_null());
}

#[test]
fn invalid_parameters_exit_2() {
    let out = arqg(&["analyze", "--lambda", "60", "--mu", "60"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("arrival rate must be < service rate"));
    assert_eq!(arqg(&["analyze", "--mu", "60"]).status.code(), Some(2));
    assert_eq!(arqg(&["equilibria", "--lambda", "45", "--mu", "60", "--cost", "-1"]).status.code(), Some(2));
    assert_eq!(arqg(&["sweep", "--what", "poc", "--points", "1"]).status.code(), Some(2));
    let out = arqg(&["learn", "--mode", "compare", "--lambda", "45", "--mu", "60", "--cost", "0.032", "--belief", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(arqg(&["learn", "--mode", "strategy", "--lambda", "45", "--mu", "60", "--cost", "0.03", "--belief", "1.5"]).status.code(), Some(2));
}

#[test]
fn equilibria_examples() {
    let some = |cost: &str| {
        let v = json(&["equilibria", "--lambda", "45", "--mu", "60", "--cost", cost]);
        let r = v["result"].clone();
        let roots: Vec<f64> = r["some_make_ar"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        (roots, r["none_make_ar"].as_bool().unwrap())
    };
    let (r, none) = some("0.024");
    assert!(r.len() == 1 && (r[0] - 0.1026).abs() < 5e-4 && !none);
    let (r, none) = some("0.032");
    assert!(r.len() == 2 && (r[0] - 2.0 / 9.0).abs() < 1e-11 && (r[1] - 0.5).abs() < 1e-11 && none);
    let (r, none) = some("0.04");
    assert!(r.is_empty() && none);
}

#[test]
fn sweeps_write_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cost.csv");
    let v = json(&["sweep", "--lambda", "45", "--mu", "60", "--what", "cost-curve", "--points", "301", "--out", path.to_str().unwrap()]);
    assert_eq!(v["result"]["rows"], 301);
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["tau", "cost"]);
    assert_eq!(rows.len(), 301);
    let peak = rows
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap()))
        .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    assert!((peak.0 - 1.0 / 3.0).abs() < 1e-9 && (peak.1 - 1.0 / 30.0).abs() < 1e-9, "{peak:?}");

    let path = dir.path().join("revenue.csv");
    json(&["sweep", "--lambda", "45", "--mu", "60", "--what", "revenue", "--points", "100", "--out", path.to_str().unwrap()]);
    let (_, rows) = read_csv(&path);
    let best = rows
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[2].parse::<f64>().unwrap()))
        .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    assert!((best.0 - 0.2).abs() < 1e-12 && (best.1 - 1.125).abs() < 1e-12, "{best:?}");

    let path = dir.path().join("poc.csv");
    json(&["sweep", "--what", "poc", "--points", "99", "--out", path.to_str().unwrap()]);
    let (header, rows) = read_csv(&path);
    assert_eq!(header.len(), 4);
    for r in &rows {
        assert_eq!(r.len(), 4);
        let rho: f64 = r[0].parse().unwrap();
        if rho <= 2.0 / 3.0 {
            assert_eq!(r[3], "1.0");
        }
    }

    // Without --out the CSV itself goes to stdout.
    let out = arqg(&["sweep", "--what", "poc", "--points", "3"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("rho,static_revenue,guaranteed_revenue,poc\n"));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing/sub/x.csv");
    let out = arqg(&["sweep", "--what", "poc", "--points", "3", "--out", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let out = arqg(&["analyze", "--config", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn strategy_learning_dips_then_converges() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let v = json(&[
        "learn", "--mode", "strategy", "--lambda", "45", "--mu", "60", "--cost", "0.032",
        "--belief", "0.4", "--steps", "50", "--out", path.to_str().unwrap(),
    ]);
    let outcome = &v["result"]["outcome"];
    assert_eq!(outcome["kind"], "converged");
    assert!(close(&outcome["limit"], 2.0 / 9.0, 1e-6));
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["index", "belief_in", "realized_threshold", "demand", "reservations", "belief_out"]);
    assert_eq!(rows.len(), 50);
    assert_eq!(rows[0][5], "0.0");

    let v = json(&["learn", "--mode", "strategy", "--lambda", "45", "--mu", "60", "--cost", "0.024", "--belief", "0.10263864609914988", "--steps", "10"]);
    assert_eq!(v["result"]["outcome"]["kind"], "converged");
}

#[test]
fn compare_mode_reports_action_learning_advantage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig.csv");
    let v = json(&[
        "learn", "--mode", "compare", "--lambda", "45", "--mu", "60", "--cost", "0.024",
        "--belief", "0.1026", "--steps", "10000", "--seed", "11", "--out", path.to_str().unwrap(),
    ]);
    let r = &v["result"];
    assert!(close(&r["action"]["ar_fraction"], 0.949, 0.015));
    assert!(close(&r["strategy"]["ar_fraction"], 0.895, 0.015));
    assert!(r["test"]["p_value"].as_f64().unwrap() < 0.01);
    let (_, rows) = read_csv(&path);
    assert_eq!(rows.len(), 10_000);
    let (s, a): (u64, u64) = rows.iter().fold((0, 0), |(s, a), r| {
        (s + r[2].parse::<u64>().unwrap(), a + r[3].parse::<u64>().unwrap())
    });
    let mean = r["action"]["mean_reservations"].as_f64().unwrap();
    assert!((a as f64 / 1e4 - mean).abs() < 1e-9);
    assert!(a > s);
}

#[test]
fn stochastic_output_is_reproducible_and_seeded() {
    let args = ["learn", "--mode", "action", "--lambda", "45", "--mu", "60", "--cost", "0.024", "--belief", "0.3", "--steps", "500", "--seed", "9"];
    let a = arqg(&args);
    let b = arqg(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 9);

    let from_env = Command::new(env!("CARGO_BIN_EXE_arqg"))
        .args(&args[..args.len() - 2])
        .env("ARQG_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(from_env.stdout, a.stdout);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"lambda": 45, "mu": 60, "cost": 0.04}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let v = json(&["equilibria", "--config", c]);
    assert_eq!(v["params"]["cost"], 0.04);
    assert_eq!(v["result"]["regime"], "unique-none-make-ar");
    let v = json(&["equilibria", "--config", c, "--cost", "0.024"]);
    assert_eq!(v["params"]["cost"], 0.024);

    std::fs::write(&cfg, r#"{"lambda": "fast"}"#).unwrap();
    assert_eq!(arqg(&["analyze", "--config", c, "--mu", "60"]).status.code(), Some(2));
}

#[test]
fn simulate_both_engines_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("customers.csv");
    let v = json(&[
        "simulate", "--lambda", "45", "--mu", "60", "--tau", "0.5", "--horizon", "5000",
        "--engine", "both", "--seed", "4", "--trace-out", path.to_str().unwrap(),
    ]);
    let r = &v["result"];
    assert_eq!(r["equivalence"]["equivalent"], true);
    assert!(r["equivalence"]["max_departure_delta"].as_f64().unwrap() < 1e-9);
    assert_eq!(r["reports"].as_array().unwrap().len(), 2);
    assert!(close(&r["reports"][0]["non_ar"]["mean_wait"], 0.05, 0.005));
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["id", "p", "action", "arrival", "departure", "wait"]);
    assert_eq!(rows.len() as u64, r["reports"][0]["customers"].as_u64().unwrap());
    assert!(rows.iter().all(|row| row.len() == 6));
}

#[test]
fn simulate_single_class_matches_pk() {
    let v = json(&["simulate", "--lambda", "45", "--mu", "60", "--tau", "1", "--horizon", "50000", "--seed", "2"]);
    let r = &v["result"]["reports"][0];
    assert!(close(&r["non_ar"]["mean_wait"], 0.025, 0.025 * 0.05));
    assert!(v["result"]["equivalence"].is_null());
}
