use std::path::Path;
use std::process::{Command, Output};

fn flatbill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatbill"))
        .args(args)
        .output()
        .expect("run flatbill")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn table_reports_geometry() {
    let out = flatbill(&["table", "--beta", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["params"]["beta"], 4.0);
    assert!(v["version"]
        .as_str()
        .unwrap()
        .starts_with(env!("CARGO_PKG_VERSION")));
    assert_eq!(v["predicted"]["a"], 3.0);
    assert_eq!(v["predicted"]["b"], 5.0);
    assert!(v["table"]["components"].as_array().unwrap().len() >= 4);
}

#[test]
fn unknown_flag_is_a_config_error() {
    let out = flatbill(&["table", "--bogus", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_values_are_config_errors() {
    for args in [
        &["table", "--beta", "2"][..],
        &["table", "--beta", "four"],
        &["table", "--epsilon", "0.9"],
        &["correlations", "--observable-f", "speed"],
        &["table", "--format", "xml"],
    ] {
        let out = flatbill(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(flatbill(&["--help"]).status.code(), Some(0));
    assert_eq!(flatbill(&["--version"]).status.code(), Some(0));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(
        &path,
        "# test\nbeta = 4\nseed = 9 # inline\nepsilon = 0.4\n",
    )
    .unwrap();
    let out = flatbill(&["table", "--config", path.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["params"]["beta"], 4.0);
    assert_eq!(v["params"]["epsilon"], 0.4);
    assert_eq!(v["params"]["seed"], 3);
}

#[test]
fn bad_config_file_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "beta = 4\nwidth = 3\n").unwrap();
    let out = flatbill(&["table", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.conf:2"), "{err}");
}

#[test]
fn shipped_configs_parse() {
    for b in [3, 4, 6] {
        let path = configs().join(format!("beta{b}.conf"));
        let out = flatbill(&["table", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "beta{b}.conf");
        assert_eq!(json(&out)["params"]["beta"], b as f64);
    }
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "return-tail",
        "--beta",
        "6",
        "--samples",
        "300000",
        "--seed",
        "5",
    ];
    let mut runs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("run{k}"));
        let mut a = args.to_vec();
        a.extend(["--out", out_dir.to_str().unwrap(), "--format", "csv"]);
        let out = flatbill(&a);
        assert_eq!(out.status.code(), Some(0));
        let csv = std::fs::read(out_dir.join("return_tail.csv")).unwrap();
        let js = std::fs::read(out_dir.join("return_tail.json")).unwrap();
        assert_eq!(out.stdout, csv);
        runs.push((csv, js));
    }
    assert_eq!(runs[0], runs[1]);
    let v: serde_json::Value = serde_json::from_slice(&runs[0].1).unwrap();
    for key in ["exponent", "stderr", "range", "r2"] {
        assert!(!v["fit"][key].is_null(), "{key}");
    }
    assert_eq!(v["predicted"]["a"], 2.0);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["counts"]["samples"], 300000);
}

#[test]
fn csv_header_reproduces_the_run() {
    let out = flatbill(&[
        "correlations",
        "--orbit-length",
        "20000",
        "--max-lag",
        "8",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let conf: String = text
        .lines()
        .skip(1)
        .take_while(|l| l.starts_with("# "))
        .map(|l| format!("{}\n", &l[2..]))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("replay.conf");
    std::fs::write(&path, conf).unwrap();
    let again = flatbill(&[
        "correlations",
        "--config",
        path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn too_few_samples_is_a_numerical_failure() {
    let out = flatbill(&["return-tail", "--samples", "200"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient tail"));
}

#[test]
fn estimators_emit_summaries() {
    let out = flatbill(&["cells", "--beta", "6", "--cell-limit", "40"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let slope = v["fit"]["exponent"].as_f64().unwrap();
    assert!((slope + 4.0).abs() < 0.4, "{slope}");

    let out = flatbill(&["corridor", "--beta", "4", "--corridor-offset", "1e-12"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["exit_type"], "pass_through");

    let out = flatbill(&["orbit", "--orbit-length", "50", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = String::from_utf8(out.stdout).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 51);
}

#[test]
fn verify_below_acceptance_size_fails_with_code_3() {
    let out = flatbill(&[
        "verify",
        "--beta",
        "6",
        "--samples",
        "200000",
        "--orbit-length",
        "200000",
        "--cell-limit",
        "60",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    let criteria = v["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 9);
    // The tail check requires at least 10^8 samples.
    assert_eq!(criteria[4]["pass"], false);
    assert_eq!(criteria[0]["pass"], true);
    assert_eq!(v["predicted"]["a"], 2.0);
    assert_eq!(v["predicted"]["b"], 4.0);
}
