use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tablecensus")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn exact_reports_count_as_string() {
    let out = run(&["exact", "--rows", "2,2", "--cols", "2,2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["count"], "3");
    assert!(v.get("elapsed_ms").is_none());
    let timed = json(&run(&["exact", "--rows", "2,2", "--cols", "2,2", "--timing"]));
    assert!(timed["elapsed_ms"].is_number());
}

#[test]
fn typical_block_json_has_small_residual() {
    let out = run(&["typical", "--family", "bd", "--n", "100", "--delta", "0.5", "--B", "2", "--C", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn sweep_errors_decrease() {
    let out = run(&[
        "sweep", "--family", "bd", "--B", "2", "--C", "1", "--delta", "0.5", "--n", "100,400,1600,6400", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "n", "delta", "B", "C", "z_hh", "z_hl", "z_ll", "z11_limit", "z1n1_limit", "znn_limit", "abs_error_z_hh",
            "total_log", "exact_log"
        ]
    );
    let col = headers.iter().position(|h| h == "abs_error_z_hh").unwrap();
    let errs: Vec<f64> = reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(errs.len(), 4);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn compare_agrees_with_exact() {
    let exact = json(&run(&["exact", "--rows", "4,3,2", "--cols", "3,3,3"]));
    let cmp = json(&run(&["compare", "--rows", "4,3,2", "--cols", "3,3,3"]));
    let count: f64 = exact["count"].as_str().unwrap().parse().unwrap();
    assert!((cmp["exact_log"].as_f64().unwrap() - count.ln()).abs() < 1e-12);
}

#[test]
fn spec_file_family_shorthand() {
    let dir = std::env::temp_dir().join(format!("tablecensus-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("family.json");
    std::fs::write(&path, r#"{"family": "bd", "n": 4, "delta": 0.5, "B": 2, "C": 1}"#).unwrap();
    let v = json(&run(&["margins", "--spec", path.to_str().unwrap()]));
    let rows: Vec<f64> = serde_json::from_value(v["rows"].clone()).unwrap();
    assert_eq!(rows, [8.0, 8.0, 4.0, 4.0, 4.0, 4.0]);
}

#[test]
fn csv_outputs_carry_headers() {
    let out = run(&["estimate", "--rows", "2,2", "--cols", "2,2", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("total_log,g,gauss_norm,half_logdet,correction_log,regime_warning\n"));
    let out = run(&["margins", "--rows", "1,2", "--cols", "3", "--format", "csv"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "side,index,value\nrow,1,1\nrow,2,2\ncol,1,3\n");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["estimate", "--nonsense"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    let out = run(&["exact", "--rows", "1,2", "--cols", "4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    // Non-integral margins cannot be counted exactly.
    assert_eq!(run(&["exact", "--family", "left_half", "--n", "16", "--C", "1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn supercritical_warning_on_stderr() {
    let out = run(&["estimate", "--family", "bd", "--n", "16", "--B", "4", "--C", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("B_c"));
    assert!(json(&out)["regime_warning"].is_string());
}

#[test]
fn monte_carlo_is_seeded() {
    let args = ["estimate", "--rows", "3,3,3", "--cols", "3,3,3", "--correction", "mc", "--samples", "5000"];
    let mut with_seed = args.to_vec();
    with_seed.extend(["--seed", "5"]);
    assert_eq!(run(&with_seed).stdout, run(&with_seed).stdout);
    assert_eq!(run(&args).status.code(), Some(1));
}
