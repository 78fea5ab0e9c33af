use std::collections::BTreeMap;
use std::process::{Command, Output};

use altserve_cli::error::CliError;
use altserve_cli::run::{run, SUMMARY_HEADER};
use altserve_cli::{preset, ExperimentSpec};

fn altserve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_altserve")).args(args).output().unwrap()
}

fn with_spec(cmd: &str, spec: &str, extra: &[&str]) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(&path, spec).unwrap();
    let mut args = vec![cmd, "--spec", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    altserve(&args)
}

type Table = Vec<BTreeMap<String, String>>;

fn parse(csv: &str) -> Table {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| header.iter().zip(l.split(',')).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn f(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn preset_table(name: &str) -> Table {
    let spec = ExperimentSpec::from_json(preset(name).unwrap()).unwrap();
    parse(&run(&spec).unwrap().csv)
}

/// Rows of one policy and one series value, in grid order.
fn series<'a>(t: &'a Table, policy: &str, series_value: &str) -> Vec<&'a BTreeMap<String, String>> {
    t.iter().filter(|r| r["policy"] == policy && r["series_value"] == series_value).collect()
}

#[test]
fn fit_examples() {
    let out = altserve(&["fit", "--mean", "1", "--scv", "0.5"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["law"]["type"], "mixed_erlang");
    assert_eq!(v["law"]["p"], 0.0);
    assert_eq!(v["law"]["n"], 2);
    assert_eq!(v["law"]["mu"], 2.0);

    let out = altserve(&["fit", "--mean", "1", "--scv", "3"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["law"]["type"], "hyperexp");
    assert!((v["law"]["p1"].as_f64().unwrap() - 0.853553).abs() < 1e-6);
    assert!((v["scv"].as_f64().unwrap() - 3.0).abs() < 1e-12);

    let out = altserve(&["fit", "--mean", "1", "--scv", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["law"], serde_json::json!({"type": "exp", "lambda": 1.0}));
}

#[test]
fn invalid_moments_exit_2() {
    for args in [["--mean", "1", "--scv", "-1"], ["--mean", "0", "--scv", "1"]] {
        let mut full = vec!["fit"];
        full.extend_from_slice(&args);
        let out = altserve(&full);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn fig2_cdfs_are_not_ordered() {
    let t = preset_table("fig2");
    let alt = series(&t, "alternating", "");
    let na = series(&t, "nonalternating", "");
    assert_eq!(alt.len(), 301);
    assert_eq!(f(alt[0], "x"), 0.0);
    assert!(f(alt[0], "cdf") > 0.0);
    assert_eq!(f(na[0], "cdf"), 0.0);
    let diff: Vec<f64> = alt.iter().zip(&na).map(|(a, n)| f(a, "cdf") - f(n, "cdf")).collect();
    assert!(diff.iter().any(|d| *d < 0.0), "cdfs never cross");
}

#[test]
fn fig3_nonalternating_insensitive_to_phases() {
    let t = preset_table("fig3");
    assert_eq!(t.len(), 3 * 10 * 2);
    for r in ["4.00000000000e-1", "8.00000000000e-1", "1.20000000000e0"] {
        let range = |policy: &str| {
            let v: Vec<f64> = series(&t, policy, r).iter().map(|row| f(row, "norm_wait")).collect();
            assert_eq!(v.len(), 10);
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        let (a, na) = (range("alternating"), range("nonalternating"));
        assert!(na < 0.10, "r={r}: non-alternating range {na}");
        assert!(a > na, "r={r}: {a} <= {na}");
    }
}

#[test]
fn fig4_wait_grows_with_preparation_mean() {
    let t = preset_table("fig4");
    for n in ["2.00000000000e0", "5.00000000000e0"] {
        for policy in ["alternating", "nonalternating"] {
            let v: Vec<f64> = series(&t, policy, n).iter().map(|row| f(row, "norm_wait")).collect();
            assert_eq!(v.len(), 20);
            assert!(v.windows(2).all(|w| w[1] >= w[0]), "{policy} n={n}: {v:?}");
        }
    }
}

#[test]
fn presets_are_marked_reconstructed() {
    for name in ["fig2", "fig3", "fig4"] {
        let spec = ExperimentSpec::from_json(preset(name).unwrap()).unwrap();
        assert!(spec.note.unwrap().contains("reconstructed"), "{name}");
    }
}

const POINT: &str = r#"{
  "service": {"law": {"type": "exp", "lambda": 1.0}},
  "prep": {"erlang": {"n": 1, "mu": 1.0}}
}"#;

#[test]
fn single_point_closed_forms() {
    let out = with_spec("compare", POINT, &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), SUMMARY_HEADER);
    let t = parse(&text);
    assert_eq!(t.len(), 2);
    assert!((f(&t[0], "mean_wait") - 0.4).abs() < 1e-10);
    assert!((f(&t[1], "mean_wait") - 0.25).abs() < 1e-10);
    assert!((f(&t[1], "p_zero") - 0.5).abs() < 1e-10);
    assert!((f(&t[0], "throughput") - 1.0 / 1.4).abs() < 1e-10);
    assert_eq!(t[0]["sim_mean_wait"], "");

    let t = parse(&String::from_utf8(with_spec("solve-na", POINT, &[]).stdout).unwrap());
    assert_eq!(t.len(), 1);
    assert_eq!(t[0]["policy"], "nonalternating");
}

#[test]
fn simulate_adds_estimates() {
    let out = with_spec("simulate", POINT, &["--customers", "200000", "--seed", "3"]);
    assert!(out.status.success());
    let t = parse(&String::from_utf8(out.stdout).unwrap());
    for row in &t {
        let diff = (f(row, "sim_mean_wait") - f(row, "mean_wait")).abs();
        assert!(diff <= 1.5 * f(row, "sim_half_width"), "{row:?}");
        assert_eq!(row["sim_customers"], "200000");
    }
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let spec = r#"{
      "policy": "both",
      "service": {"fit": {"mean": 1.0, "scv": 0.5}},
      "prep": {"erlang": {"n": 3, "mean": 1.0}},
      "sweep": {"param": "ratio", "values": [0.5, 1.0, 2.0]},
      "sim": {"customers": 20000, "replications": 3, "seed": 9}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(&path, spec).unwrap();
    let go = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_altserve"))
            .args(["compare", "--spec", path.to_str().unwrap()])
            .env("ALTSERVE_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    let one = go("1");
    assert_eq!(one, go("1"));
    assert_eq!(one, go("4"));
    assert_eq!(parse(&String::from_utf8(one).unwrap()).len(), 6);
}

#[test]
fn out_flag_and_spec_output_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("a.csv");
    let out = with_spec("solve-alt", POINT, &["--out", target.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&target).unwrap().starts_with(SUMMARY_HEADER));

    let target = dir.path().join("b.csv");
    let spec = POINT.replacen('{', &format!("{{\"output\": {:?},", target.to_str().unwrap()), 1);
    assert!(with_spec("solve-alt", &spec, &[]).status.success());
    assert!(target.exists());
}

#[test]
fn invalid_specs_exit_2() {
    let bad = [
        r#"{"service": {"law": {"type": "exp", "lambda": 1}}, "prep": {"erlang": {"n": 1, "mu": 1, "mean": 1}}}"#,
        r#"{"service": {"law": {"type": "exp", "lambda": 1}}, "prep": {"erlang": {"n": 1, "mu": 1}}, "extra": 1}"#,
        r#"{"service": {"law": {"type": "exp", "lambda": 1}, "fit": {"mean": 1, "scv": 1}}, "prep": {"erlang": {"n": 1, "mu": 1}}}"#,
        r#"{"service": {"law": {"type": "exp", "lambda": 1}}, "prep": {"erlang": {"n": 1, "mu": 1}}, "sweep": {"param": "ratio", "values": []}}"#,
        r#"{"service": {"law": {"type": "exp", "lambda": 1}}, "prep": {"erlang": {"n": 1, "mu": 1}}, "sweep": {"param": "service_scv", "values": [0.5]}}"#,
        r#"{"service": {"fit": {"mean": 1, "scv": 1}}, "prep": {"erlang": {"n": 1, "mu": 1}}, "sweep": {"param": "prep_phases", "values": [2.5]}}"#,
        r#"{"service": {"fit": {"mean": 1, "scv": 1}}, "prep": {"law": {"type": "prep", "mu": 1, "kappa": [0.5, 0.5]}}}"#,
        r#"{"service": {"fit": {"mean": 1, "scv": 1}}, "prep": {"fit": {"mean": 1, "scv": 2}}, "policy": "alternating"}"#,
        r#"{"service": {"fit": {"mean": 1, "scv": 1}}, "prep": {"erlang": {"n": 2, "mu": 1}}, "sweep": {"param": "x", "values": [-1]}}"#,
        r#"not json"#,
    ];
    for spec in bad {
        let out = with_spec("compare", spec, &[]);
        assert_eq!(out.status.code(), Some(2), "{spec}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(altserve(&["solve-alt"]).status.code(), Some(2));
    assert_eq!(altserve(&["solve-alt", "--spec", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn mixed_preparation_allowed_for_alternating_only() {
    let spec = r#"{"service": {"fit": {"mean": 1, "scv": 0.3}},
                   "prep": {"fit": {"mean": 2, "scv": 0.4}}}"#;
    let out = with_spec("solve-alt", spec, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(with_spec("solve-na", spec, &[]).status.code(), Some(2));
}

#[test]
fn solver_failures_map_to_exit_3() {
    let e: CliError = altserve_core::Error::NumericFailure("singular".into()).into();
    assert_eq!(e.exit_code(), 3);
    let e: CliError = altserve_core::Error::Inconsistent("bad".into()).into();
    assert_eq!(e.exit_code(), 3);
    let e: CliError = altserve_core::Error::OutOfFamily("x".into()).into();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn fig2_simulation_reports_kolmogorov_distance() {
    let out = altserve(&["fig2", "--customers", "20000"]);
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.matches("Kolmogorov distance").count(), 2);
    let t = parse(&String::from_utf8(out.stdout).unwrap());
    assert!(t.iter().all(|r| !r["sim_cdf"].is_empty()));
}
