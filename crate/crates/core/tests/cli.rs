use std::fs;
use std::path::Path;

use lightcone::cli::run_cli;
use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> i32 {
    let mut full = vec![
        "lightcone".to_string(),
        "--quiet".into(),
        "--out".into(),
        out.display().to_string(),
    ];
    full.extend(args.iter().map(|s| s.to_string()));
    run_cli(full)
}

fn report(out: &Path, command: &str) -> Value {
    let text = fs::read_to_string(out.join(format!("{command}_report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn constants_above_threshold_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["constants", "--mu", "10"]), 0);
    let r = report(dir.path(), "constants");
    assert_eq!(r["passed"], true);
    assert!(dir.path().join("constants.json").exists());
    assert!(dir.path().join("timings.json").exists());
}

#[test]
fn constants_below_threshold_fail_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["constants", "--mu", "2"]), 1);
    let r = report(dir.path(), "constants");
    assert_eq!(r["passed"], false);
    assert!(!r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn invalid_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--potential=1,1", "constants"]), 2);
    assert_eq!(run(dir.path(), &["bands", "--nodes", "7"]), 2);
    assert_eq!(run(dir.path(), &["no-such-command"]), 2);
}

#[test]
fn verify_writes_the_matching_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(dir.path(), &["verify", "--p", "6", "--trials", "50"]),
        0
    );
    let csv = fs::read_to_string(dir.path().join("matchings_p6.csv")).unwrap();
    assert_eq!(csv.lines().count(), 14);
    assert!(csv.starts_with("k,matching,term"));
    assert!(csv.contains("|b2|^2 |b5|^2"));
}

#[test]
fn perturbed_formula_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(
            dir.path(),
            &["verify", "--trials", "20", "--perturb-formula"]
        ),
        1
    );
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    let det = v["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "determinant")
        .unwrap();
    assert_eq!(det["passed"], false);
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cases: &[(&[&str], &[&str])] = &[
        (
            &["bands", "--mu", "10", "--nodes", "64"],
            &["bands.csv", "localization.json"],
        ),
        (
            &[
                "kernel",
                "--mu",
                "3",
                "--t",
                "5",
                "--dmax",
                "10",
                "--entries",
            ],
            &["kernel.csv", "kernel_entries.json"],
        ),
        (
            &[
                "evolve", "--mu", "10", "--t", "20", "--sites", "201", "--method", "eig",
            ],
            &["profile.csv", "evolve.gp"],
        ),
        (
            &["lightcone", "--mu", "10"],
            &["cone.csv", "fronts.csv", "lightcone.gp"],
        ),
        (
            &["vasy", "--mu", "10", "--direct-time", "500"],
            &["vasy.json"],
        ),
        (
            &["sweep", "--mus", "10,20,40,100", "--no-front"],
            &["sweep.csv", "sweep.json", "scaling.gp"],
        ),
    ];
    for (args, files) in cases {
        assert_eq!(run(out, args), 0, "{args:?}");
        for f in *files {
            assert!(out.join(f).exists(), "{args:?} did not write {f}");
        }
    }
}

#[test]
fn pipeline_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "potential = [0.0, 1.0, 2.0]\nmu = 50.0\nmus = [50.0, 100.0, 200.0, 500.0]\nt = 50.0\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&out, &["--config", config.to_str().unwrap(), "pipeline"]),
        0
    );
    let r = report(&out, "pipeline");
    assert_eq!(r["passed"], true);
    for stage in ["constants", "bands", "kernel", "lightcone", "vasy", "sweep"] {
        assert!(r["results"].get(stage).is_some(), "missing {stage}");
    }
    assert_eq!(r["config"]["potential"], serde_json::json!([0.0, 1.0, 2.0]));
}
