use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_basketquad")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

const S1: &str = r#"{ "type": "spread", "weights": [1, -1], "spots": [100, 96],
    "dividends": [0.05, 0.05], "rate": 0.1, "vols": [0.2, 0.1],
    "correlation": 0.5, "expiry": 1, "strikes": [0, 2, 4] }"#;

#[test]
fn price_reports_every_strike() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir, "s1.json", S1);
    let out = run(&["price", file.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    for value in ["8.5132252", "7.5423239", "6.6530651"] {
        assert!(text.contains(value), "{value} missing from\n{text}");
    }
    assert_eq!(text, stdout(&run(&["price", file.to_str().unwrap()])));

    let fwd = stdout(&run(&["price", file.to_str().unwrap(), "--forward-value", "--nodes", "2=8"]));
    assert!(fwd.contains("9.4085689"), "{fwd}");
    assert!(fwd.contains("grid [8]"), "{fwd}");
}

#[test]
fn price_with_monte_carlo_column() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir, "s1.json", S1);
    let out = run(&["price", file.to_str().unwrap(), "--mc-paths", "20000", "--seed", "3"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("mc stderr"));
}

#[test]
fn factors_layout() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir, "s1.json", S1);
    let out = run(&["factors", file.to_str().unwrap(), "--nodes", "2=4"]);
    assert!(out.status.success());
    let lines: Vec<String> = stdout(&out).lines().map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ")).collect();
    assert_eq!(lines[0], "0.125 | 0.172 0.143 | 0.224");
    assert_eq!(lines[2], "0.721 | 0.172 0.102 | 0.200");
    assert_eq!(lines[3], "-0.693 | -0.001 0.100 | 0.100");
    assert_eq!(lines[5], "| \u{b7} 4 | 4");
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir, "bad.json", &S1.replace("[0.2, 0.1]", "[0.2, \"x\"]"));
    let out = run(&["price", file.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("vols[1]"), "{err}");

    let out = run(&["price", dir.path().join("missing.json").to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s1.csv");
    let out = run(&["bench", "S1", "--mode", "converged", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("case,K,price,reference,deviation,M,seconds"));
    assert_eq!(lines.count(), 11);
    assert!(!run(&["bench", "S9"]).status.success());
}

#[test]
fn sweep_prints_each_grid() {
    let out = run(&["sweep", "S1", "--grid", "2", "--grid", "3", "--grid", "4"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 1 + 3 * 11);
    assert!(!run(&["sweep", "S1"]).status.success());
}
