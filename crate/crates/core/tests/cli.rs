use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carbon-incentive"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("april.csv");
    let mut text = String::from("date,carbon_intensity\n");
    for n in 1..=30 {
        let v = if n % 2 == 0 { 275.0 } else { 200.0 };
        text.push_str(&format!("2024-04-{n:02},{v}\n"));
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_emits_twelve_rows() {
    let out = run(&["sweep", "--p-list", "0.1,0.3,0.5", "--format", "csv", "--a-step", "0.005", "--d-step", "0.005"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().nth(1).unwrap().starts_with("hq,0.500000,2.000000,1.000000,0.100000,"));
    assert!(text.lines().last().unwrap().starts_with("green,0.900000,5.000000,1.100000,0.500000,"));
}

#[test]
fn optimize_at_zero_price() {
    let out = run(&["optimize", "--profile", "hq", "--lambda", "0.5", "--p", "0", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["accuracy"].to_string(), "1.000000");
    assert_eq!(v["latency"].to_string(), "1.000000");
    assert_eq!(v["reduction"].to_string(), "0.000000");
}

#[test]
fn tier_json_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let output = dir.path().join("plan.json");
    let out = run(&[
        "tier",
        "--input",
        input.to_str().unwrap(),
        "--threshold",
        "220",
        "--profile",
        "hq",
        "--lambda",
        "0.5",
        "--format",
        "json",
        "--a-step",
        "0.001",
        "--d-step",
        "0.001",
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(v["aggregates"]["low_tier_fraction"].to_string(), "0.500000");
    assert_eq!(v["days"].as_array().unwrap().len(), 30);
}

#[test]
fn curves_and_fit() {
    let out = run(&["curves"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "a,u_sensitive,u_green");
    assert_eq!(text.lines().count(), 26);

    let out = run(&["curves", "--curve", "latency", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["curve"], "latency");
    assert_eq!(v["rows"].as_array().unwrap().len(), 57);

    let out = run(&["fit", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["slope"].to_string(), "6.291391");
}

#[test]
fn custom_emissions_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    std::fs::write(
        &path,
        "kind,value,reduction\naccuracy,1.0,0\naccuracy,0.9,0.6\nlatency,1.0,0\nlatency,1.12,0.19\nlatency,1.28,0.26\n",
    )
    .unwrap();
    let out = run(&["fit", "--emissions", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("slope,6.000000"));
}

#[test]
fn exit_codes_and_diagnostics() {
    let out = run(&["optimize", "--profile", "custom", "--lambda", "0.5", "--p", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--b") && err.contains("--x"), "{err}");

    let out = run(&["optimize", "--p", "0.3", "--format", "yaml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--format"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "date,carbon_intensity\n2024-04-01,200\n2024-04-02,-5\n").unwrap();
    let out = run(&["tier", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "date,carbon_intensity\n").unwrap();
    let out = run(&["tier", "--input", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let cases: Vec<Vec<&str>> = vec![
        vec!["curves", "--format", "json"],
        vec!["optimize", "--profile", "green", "--lambda", "0.9", "--p", "0.3"],
        vec!["sweep", "--a-step", "0.005", "--d-step", "0.005", "--format", "json"],
        vec!["fit"],
        vec!["tier", "--input", input.to_str().unwrap(), "--a-step", "0.002", "--d-step", "0.002"],
    ];
    for args in cases {
        let first = run(&args);
        let second = run(&args);
        assert!(first.status.success(), "{args:?}");
        assert_eq!(first.stdout, second.stdout, "{args:?}");
    }
}
