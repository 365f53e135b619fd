use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lorenz_scb::svg::element_names;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lorenz-scb"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_csv(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// Deterministic skewed incomes: 1, 4, 9, ... plus a little jitter.
fn population_csv(dir: &TempDir, size: usize) -> PathBuf {
    let mut body = String::from("household,income\n");
    for i in 1..=size {
        body.push_str(&format!("h{i},{}\n", (i * i) as f64 + (i % 7) as f64 * 0.3));
    }
    write_csv(dir, "pop.csv", &body)
}

fn count(names: &[String], name: &str) -> usize {
    names.iter().filter(|n| *n == name).count()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn lorenz_json_reports_gini() {
    let dir = TempDir::new().unwrap();
    // 3 poor units share nothing, 1 unit holds everything
    let csv = write_csv(&dir, "t.csv", "income\n0\n0\n0\n8\n");
    let json: Value = serde_json::from_str(&stdout(&run(&["lorenz", "--input", p(&csv)]))).unwrap();
    assert_eq!(json["population_size"], 4);
    assert!((json["gini"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert_eq!(json["points"].as_array().unwrap().len(), 5);
}

#[test]
fn lorenz_csv_and_svg() {
    let dir = TempDir::new().unwrap();
    let csv = population_csv(&dir, 10);
    let table = stdout(&run(&["lorenz", "--input", p(&csv), "--format", "csv"]));
    assert_eq!(table.lines().next(), Some("p,q"));
    assert_eq!(table.lines().count(), 12);
    assert_eq!(table.lines().last(), Some("1,1"));

    let svg = stdout(&run(&["lorenz", "--input", p(&csv), "--format", "svg"]));
    let names = element_names(&svg).unwrap();
    assert_eq!(names[0], "svg");
    assert_eq!(count(&names, "path"), 1);
}

#[test]
fn band_svg_element_counts() {
    let dir = TempDir::new().unwrap();
    let csv = population_csv(&dir, 200);
    let base = [
        "--seed",
        "4",
        "band",
        "--input",
        p(&csv),
        "--n",
        "20",
        "--mc-draws",
        "200",
        "--format",
        "svg",
    ];

    let svg = stdout(&run(&base));
    let names = element_names(&svg).unwrap();
    assert_eq!(count(&names, "path"), 3);
    assert!(count(&names, "polygon") > 0);

    let mut with_pop = base.to_vec();
    with_pop.push("--show-population");
    let names = element_names(&stdout(&run(&with_pop))).unwrap();
    assert_eq!(count(&names, "path"), 4);
}

#[test]
fn band_json_pcb_and_scb() {
    let dir = TempDir::new().unwrap();
    let csv = population_csv(&dir, 150);
    let out = dir.path().join("band.json");
    let common = [
        "band",
        "--input",
        p(&csv),
        "--n",
        "15",
        "--mc-draws",
        "200",
        "--output",
        p(&out),
    ];

    let mut pcb = common.to_vec();
    pcb.extend(["--kind", "pcb"]);
    assert!(stdout(&run(&pcb)).is_empty());
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["kind"], "pcb");
    assert!((json["critical"].as_f64().unwrap() - 5.991).abs() < 1e-3);
    assert_eq!(json["n"], 15);
    assert_eq!(json["population_size"], 150);
    assert_eq!(json["seed"], 0);
    assert_eq!(json["estimate"].as_array().unwrap().len(), 15);
    assert!(json["population_covered"].is_boolean());

    stdout(&run(&common));
    let scb: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(scb["kind"], "scb");
    assert!(scb["critical"].as_f64().unwrap() > json["critical"].as_f64().unwrap());
    assert_eq!(scb["davies_c"], json["davies_c"]);
    let ellipses = scb["geometry"]["ellipses"].as_array().unwrap();
    assert!(!ellipses.is_empty());
}

#[test]
fn missing_column_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(&dir, "t.csv", "wage\n1\n2\n");
    let out = run(&["lorenz", "--input", p(&csv), "--column", "earnings"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("earnings"));
}

#[test]
fn bad_cell_reports_file_and_line() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(&dir, "t.csv", "income\n1\n2\nabc\n");
    let out = run(&["lorenz", "--input", p(&csv)]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("t.csv") && err.contains("line 4") && err.contains("abc"),
        "{err}"
    );

    let out = run(&["lorenz", "--input", p(&dir.path().join("absent.csv"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let csv = population_csv(&dir, 30);
    for args in [
        vec!["lorenz", "--input", p(&csv), "--format", "png"],
        vec!["band", "--input", p(&csv)],
        vec!["band", "--input", p(&csv), "--n", "20", "--format", "csv"],
        vec!["band", "--input", p(&csv), "--n", "31"],
        vec!["band", "--input", p(&csv), "--n", "10", "--alpha", "1.5"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
    let out = bin()
        .args(["lorenz", "--input", p(&csv)])
        .env("LORENZ_SCB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_rejects_bad_trim() {
    let dir = TempDir::new().unwrap();
    let config = write_csv(
        &dir,
        "bad.json",
        r#"{
            "population": {"synthetic": {"generator": {"kind": "log_normal", "mu": 0.0, "sigma": 1.0, "size": 100}, "seed": 1}},
            "sample_sizes": [10],
            "replications": 0,
            "alpha": 0.05,
            "trim": 0.6,
            "seed": 1
        }"#,
    );
    let out = run(&["simulate", "--config", p(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("trim 0.6") && err.contains("replications"),
        "{err}"
    );

    let unknown = write_csv(
        &dir,
        "unknown.json",
        r#"{"sample_sizes": [10], "bogus": 1}"#,
    );
    assert_eq!(
        run(&["simulate", "--config", p(&unknown)]).status.code(),
        Some(2)
    );
}

#[test]
fn simulate_writes_report_and_table() {
    let dir = TempDir::new().unwrap();
    let csv = population_csv(&dir, 120);
    let config = write_csv(
        &dir,
        "sim.json",
        &format!(
            r#"{{
                "population": {{"csv": {{"path": {:?}, "column": "income"}}}},
                "sample_sizes": [8, 16],
                "replications": 6,
                "alpha": 0.1,
                "trim": 0.05,
                "seed": 9,
                "grid": {{"mc_draws": 150}}
            }}"#,
            p(&csv)
        ),
    );
    let out = dir.path().join("report.json");
    let table = stdout(&run(&[
        "simulate",
        "--config",
        p(&config),
        "--output",
        p(&out),
    ]));
    assert!(table.starts_with("n "));
    assert_eq!(table.lines().count(), 3);

    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["replications"], 6);
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    let csv_table = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert_eq!(csv_table.lines().next(), Some("band,8,16"));
}
