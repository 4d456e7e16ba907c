use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attnmle::instance::InstanceFile;
use attnmle::verify::{Check, Verifier};
use tempfile::TempDir;

fn attnmle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attnmle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_instance(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

/// Runs `attend` and parses the CSV into a header and numeric rows.
fn attend(input: &Path, dir: &TempDir) -> (Vec<String>, Vec<Vec<f64>>) {
    let out = dir.path().join("out.csv");
    let run = attnmle(&["attend", "--input", path_str(input), "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn assert_digits(actual: f64, expected: f64) {
    let scale = expected.abs().max(1e-300);
    assert!(
        (actual - expected).abs() / scale < 1e-10,
        "{actual} vs {expected}"
    );
}

#[test]
fn attend_single_key_returns_its_value() {
    let dir = TempDir::new().unwrap();
    let input = write_instance(
        &dir,
        "one.json",
        r#"{"alpha": 3.0, "beta": 1.0, "queries": [[0.4, -2.0]], "keys": [[5.0, 1.0]], "values": [[0.25, -7.5]]}"#,
    );
    let (header, rows) = attend(&input, &dir);
    assert_eq!(header, ["query", "w_1", "c_1", "c_2"]);
    assert_eq!(rows, vec![vec![1.0, 1.0, 0.25, -7.5]]);
}

#[test]
fn attend_identical_keys_average_values() {
    let dir = TempDir::new().unwrap();
    let input = write_instance(
        &dir,
        "same.json",
        r#"{"alpha": 0.7, "beta": 2.0, "queries": [[1.0, 2.0]],
            "keys": [[0.3, 0.3], [0.3, 0.3], [0.3, 0.3], [0.3, 0.3]],
            "values": [[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 8.0]]}"#,
    );
    let (_, rows) = attend(&input, &dir);
    for w in &rows[0][1..5] {
        assert_digits(*w, 0.25);
    }
    assert_digits(rows[0][5], 2.5);
    assert_digits(rows[0][6], 2.0);
}

#[test]
fn attend_three_keys_matches_softmax_oracle() {
    let dir = TempDir::new().unwrap();
    let input = write_instance(
        &dir,
        "three.json",
        r#"{"alpha": 1.0, "beta": 1.0, "queries": [[1.0, 0.0], [0.0, 0.0]],
            "keys": [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]],
            "values": [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            "lambdas": [1.0, 1.0, 1.0]}"#,
    );
    let (header, rows) = attend(&input, &dir);
    assert_eq!(
        header,
        ["query", "w_1", "w_2", "w_3", "c_1", "c_2", "p_1", "p_2", "p_3"]
    );
    let e = std::f64::consts::E;
    let z = e + 1.0 + 1.0 / e;
    let w = [e / z, 1.0 / z, 1.0 / (e * z)];
    let c = [w[0] + 3.0 * w[1] + 5.0 * w[2], 2.0 * w[0] + 4.0 * w[1] + 6.0 * w[2]];
    assert_eq!(rows[0][0], 1.0);
    for i in 0..3 {
        assert_digits(rows[0][1 + i], w[i]);
        assert_digits(rows[0][6 + i], w[i]);
    }
    assert_digits(rows[0][4], c[0]);
    assert_digits(rows[0][5], c[1]);
    // The zero query attends uniformly.
    assert_eq!(rows[1][0], 2.0);
    for i in 0..3 {
        assert_digits(rows[1][1 + i], 1.0 / 3.0);
    }
    assert_digits(rows[1][4], 3.0);
    assert_digits(rows[1][5], 4.0);
}

#[test]
fn attend_malformed_file_names_the_field() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.csv");
    let cases = [
        (r#"{"alpha": 1, "beta": 1, "queries": [[1, 0]], "keys": [[1, 0], [0]], "values": [[1], [2]]}"#, "keys[1]"),
        (r#"{"alpha": -1, "beta": 1, "queries": [[1]], "keys": [[1]], "values": [[1]]}"#, "alpha"),
        (r#"{"alpha": 1, "beta": 0, "queries": [[1]], "keys": [[1]], "values": [[1]]}"#, "beta"),
        (r#"{"alpha": 1, "beta": 1, "queries": [[1]], "keys": [[1]], "values": [[1]], "lambdas": [1, 2]}"#, "lambdas"),
        (r#"{"alpha": 1, "beta": 1, "queries": [[1]], "keys": [[1]], "values": [[1]], "gamma": 3}"#, "gamma"),
        (r#"{"alpha": 1, "beta": 1, "queries": [[1]], "keys": [[1]]}"#, "values"),
    ];
    for (json, field) in cases {
        let input = write_instance(&dir, "bad.json", json);
        let run = attnmle(&["attend", "--input", path_str(&input), "--output", path_str(&out)]);
        let stderr = String::from_utf8_lossy(&run.stderr);
        assert_eq!(run.status.code(), Some(2), "{json}: {stderr}");
        assert!(stderr.contains(field), "{field} missing from: {stderr}");
    }
    let missing = dir.path().join("absent.json");
    let run = attnmle(&["attend", "--input", path_str(&missing), "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn attend_overflowing_logits_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let input = write_instance(
        &dir,
        "big.json",
        r#"{"alpha": 1e300, "beta": 1.0, "queries": [[1e300]], "keys": [[1e300], [1.0]], "values": [[1.0], [2.0]]}"#,
    );
    let out = dir.path().join("out.csv");
    let run = attnmle(&["attend", "--input", path_str(&input), "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn generate_is_deterministic_and_feeds_attend() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let run = attnmle(&["generate", "--seed", "7", "--t", "8", "--d", "4", "--output", path_str(p)]);
        assert_eq!(run.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let file = InstanceFile::read(&a).unwrap();
    assert_eq!(file, attnmle::instance::generate(7, 8, 4));
    let inst = file.validate().unwrap();
    assert_eq!((inst.queries.len(), inst.seq.len(), inst.seq.dim()), (8, 8, 4));
    let mut verifier = Verifier::default();
    verifier.check_instance(&inst, 0, 7);
    let report = verifier.finish();
    assert!(report.passed(), "{}", report.table());

    let (header, rows) = attend(&a, &dir);
    assert_eq!(header.len(), 1 + 8 + 4);
    assert_eq!(rows.len(), 8);
    for row in rows {
        let sum: f64 = row[1..9].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn generate_rejects_zero_sizes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.json");
    for args in [["--t", "0", "--d", "3"], ["--t", "3", "--d", "0"]] {
        let mut full = vec!["generate", "--seed", "1", "--output", path_str(&out)];
        full.extend(args);
        assert_eq!(attnmle(&full).status.code(), Some(2));
    }
}

#[test]
fn verify_default_seed_passes() {
    let run = attnmle(&["verify", "--seed", "42", "--instances", "100"]);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(run.status.code(), Some(0), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    for check in Check::ALL {
        assert!(stdout.contains(check.name()), "{} missing", check.name());
    }
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn verify_single_instance_with_one_key() {
    let seed = (0..10_000u64)
        .find(|&s| attnmle::instance::random_instance(s).keys.len() == 1)
        .expect("some seed draws T = 1");
    let run = attnmle(&["verify", "--seed", &seed.to_string(), "--instances", "1"]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn verify_zero_instances_is_usage_error() {
    assert_eq!(attnmle(&["verify", "--instances", "0"]).status.code(), Some(2));
}

#[test]
fn bench_single_length_reports_na() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b.csv");
    let run = attnmle(&["bench", "--t", "1", "--repeats", "2", "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&run.stdout).contains("NA"));
    let csv = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,inner_products,wall_time_ns");
    assert!(lines[1].starts_with("1,1,"));
}

#[test]
fn bench_counts_are_exact() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b.csv");
    let run = attnmle(&["bench", "--t", "4,16,64", "--repeats", "1", "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(0));
    let csv = std::fs::read_to_string(out).unwrap();
    let counts: Vec<(u64, u64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<u64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    assert_eq!(counts, [(4, 16), (16, 256), (64, 4096)]);
    assert!(!String::from_utf8_lossy(&run.stdout).contains("NA"));
}

#[test]
fn bench_invalid_lengths_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b.csv");
    for t in ["0", "4,0", "x", "-3"] {
        let run = attnmle(&["bench", "--t", t, "--output", path_str(&out)]);
        assert_eq!(run.status.code(), Some(2), "--t {t}");
    }
    let run = attnmle(&["bench", "--t", "4", "--repeats", "0", "--output", path_str(&out)]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_and_help() {
    assert_eq!(attnmle(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(attnmle(&[]).status.code(), Some(2));
    let help = attnmle(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("verify"));
}

#[test]
fn in_process_runner_writes_to_given_streams() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = attnmle::cli::run(["attnmle", "verify", "--seed", "3", "--instances", "2"], &mut out, &mut err);
    assert_eq!(code, attnmle::cli::EXIT_OK);
    assert!(String::from_utf8(out).unwrap().contains("PASS"));
    assert!(err.is_empty());
}
