use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cel_cli::io::{parse_space_csv, parse_space_json, space_to_csv, space_to_json};
use cel_core::random::corpus;
use cel_core::MetricMeasureSpace;
use proptest::prelude::*;
use serde_json::Value;

fn cel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a json report")
}

#[test]
fn random_spaces_round_trip_through_both_formats() {
    for (i, s) in corpus(100, 2, 30, 77).into_iter().enumerate() {
        let labels = (0..s.n()).map(|k| format!("p{i},{k} \"q\"")).collect();
        let s = MetricMeasureSpace::new(labels, s.distances().clone(), s.weights().to_vec()).unwrap();
        assert_eq!(parse_space_json(&space_to_json(&s)).unwrap(), s);
        assert_eq!(parse_space_csv(&space_to_csv(&s)).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_labels_survive_csv(labels in prop::collection::vec("[ -~]{1,12}", 2..6)) {
        // fields are trimmed on input, so edge whitespace is not representable
        let labels: Vec<String> = labels.into_iter().map(|l| format!("<{l}>")).collect();
        let n = labels.len();
        let d = cel_core::MetricMatrix::new(cel_core::SquareMatrix::from_fn(n, |i, j| (i != j) as u8 as f64)).unwrap();
        let s = MetricMeasureSpace::new(labels, d, vec![1.0; n]).unwrap();
        prop_assert_eq!(parse_space_csv(&space_to_csv(&s)).unwrap(), s);
    }
}

#[test]
fn canonical_on_p3_reports_s() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p3.json");
    fs::write(&path, space_to_json(&cel_core::fixtures::p3())).unwrap();
    let out = cel(&["--no-timestamp", "canonical", "--input", path.to_str().unwrap()]);
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["schema_version"], "1");
    assert_eq!(r["command"], "canonical");
    assert_eq!(r["parameters"]["seed"], 0);
    assert!(r.get("timing").is_none());
    assert!((r["results"]["s"].as_f64().unwrap() - 1.0 / 3.0).abs() <= 1e-15);
}

#[test]
fn timing_is_present_by_default() {
    let out = cel(&["validate", "--fixture", "p2"]);
    assert!(out.status.success());
    assert!(report(&out)["timing"]["unix_time"].as_u64().unwrap() > 0);
}

#[test]
fn interval_delta_reports_the_bound() {
    let out = cel(&["--no-timestamp", "interval-delta", "--n", "1000"]);
    assert!(out.status.success());
    let cmp = &report(&out)["results"]["comparison"];
    assert!(cmp["max_abs_error"].as_f64().unwrap() <= 2e-3);
    assert_eq!(cmp["holds"], true);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(cel(&["canonical", "--fixture", "p3", "--bogus"]).status.code(), Some(1));
    assert_eq!(cel(&["nonsense"]).status.code(), Some(1));
    assert_eq!(cel(&["canonical", "--fixture", "q9"]).status.code(), Some(1));
    assert_eq!(cel(&["quadruple", "--fixture", "p3", "--p", "0.5"]).status.code(), Some(1));
    assert_eq!(cel(&["--help"]).status.code(), Some(0));
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let neg = write(dir.path(), "neg.csv", "# labels: a,b\n# weights: 0.5,-0.5\n0,1\n1,0\n");
    let out = cel(&["canonical", "--input", &neg]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2") && msg.contains("`b`"), "{msg}");

    let asym = write(dir.path(), "asym.csv", "0,1,1\n1,0,1\n2,1,0\n");
    let out = cel(&["canonical", "--input", &asym]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[0, 2]"));

    // validate still writes its report for a failing matrix
    let out = cel(&["--no-timestamp", "validate", "--input", &asym]);
    assert_eq!(out.status.code(), Some(2));
    let v = &report(&out)["results"]["validation"];
    assert_eq!(v["passed"], false);
    assert_eq!(v["violations"][0]["axiom"], "symmetry");

    let missing = dir.path().join("missing.json");
    assert_eq!(cel(&["validate", "--input", missing.to_str().unwrap()]).status.code(), Some(2));
    let broken = write(dir.path(), "broken.json", "{\"distances\": [[0, 1], [1, 0]");
    let out = cel(&["validate", "--input", &broken]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn gauge_reports_rejection_without_failing() {
    let out = cel(&["--no-timestamp", "gauge", "--fixture", "p3", "--target", "0.6"]);
    assert!(out.status.success());
    let o = &report(&out)["results"]["openness"];
    assert_eq!(o["accepted"], false);
    assert_eq!(o["required"], 0.5);
    assert!(o["measured"].as_f64().unwrap() >= 0.5);

    let out = cel(&["--no-timestamp", "gauge", "--fixture", "p3", "--target", "0.1"]);
    let o = &report(&out)["results"]["openness"];
    assert_eq!(o["accepted"], true);
    assert_eq!(o["transfer"]["certificate"]["c"].as_f64().unwrap(), 2.0 / 3.0);
}

#[test]
fn side_tables_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let csv_dir = dir.path().join("tables");
    let out_path = dir.path().join("report.json");
    let out = cel(&[
        "--csv-dir",
        csv_dir.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
        "counterexample",
        "--n-max",
        "3",
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["results"]["suite"]["rows"].as_array().unwrap().len(), 2);
    let suite = fs::read_to_string(csv_dir.join("counterexample_suite.csv")).unwrap();
    assert!(suite.starts_with("n_max,grid,points,ell"));
    assert_eq!(suite.lines().count(), 3);
    assert!(csv_dir.join("kal_doubling.csv").exists());
}

#[test]
fn seeds_change_sampled_results_only_through_the_seed() {
    let run = |seed: &str| cel(&["--seed", seed, "--no-timestamp", "embed", "--fixture", "t4", "--dim", "2", "--trials", "10"]).stdout;
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}
