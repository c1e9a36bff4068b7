use std::path::Path;
use std::process::{Command, Output};

fn tsb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsb")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = tsb(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn read_column(path: &str, column: usize) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(column).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (p(dir.path(), "a.csv"), p(dir.path(), "b.csv"));
    ok(&["synth", "--red", "58", "--green", "42", "--seed", "7", "--out", &a]);
    ok(&["synth", "--red", "58", "--green", "42", "--seed", "7", "--out", &b]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 101);
    assert_eq!(text.lines().next().unwrap(), "X1,X2,label");
}

#[test]
fn sweep_with_two_lambdas_has_two_aggregate_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    let out = p(dir.path(), "sweep.csv");
    ok(&["synth", "--seed", "1", "--out", &data]);
    ok(&[
        "sweep", "--data", &data, "--lambdas", "0,inf", "--depth", "3", "--folds", "5", "--trials", "2", "--out", &out,
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,mean_train_error,se_train,mean_test_error,se_test");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("inf,"));
    let rows = std::fs::read_to_string(p(dir.path(), "sweep.rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 5 * 2);
    assert!(dir.path().join("sweep.baselines.csv").exists());
}

#[test]
fn lambda_zero_predictions_match_cart() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    ok(&["synth", "--seed", "3", "--out", &data]);
    let common = ["--data", &data, "--loss", "squared", "--shrinkage", "1", "--depth", "4", "--seed", "3"];
    let (m1, m2) = (p(dir.path(), "tsb.json"), p(dir.path(), "cart.json"));
    ok(&[&["train", "--lambda", "0"][..], &common, &["--out", &m1]].concat());
    ok(&[&["baseline", "--algo", "cart"][..], &common, &["--out", &m2]].concat());
    let (p1, p2) = (p(dir.path(), "p1.csv"), p(dir.path(), "p2.csv"));
    ok(&["predict", "--model", &m1, "--data", &data, "--out", &p1]);
    ok(&["predict", "--model", &m2, "--data", &data, "--out", &p2]);
    let (a, b) = (read_column(&p1, 1), read_column(&p2, 1));
    assert_eq!(a.len(), 100);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
    }
}

#[test]
fn deviance_predictions_carry_label_and_probability() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    let model = p(dir.path(), "m.json");
    let out = p(dir.path(), "p.csv");
    ok(&["synth", "--seed", "2", "--out", &data]);
    ok(&["train", "--data", &data, "--lambda", "inf", "--depth", "3", "--out", &model]);
    ok(&["predict", "--model", &model, "--data", &data, "--out", &out]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "id,margin,label,probability");
    for (m, prob) in read_column(&out, 1).into_iter().zip(read_column(&out, 3)) {
        assert_eq!(prob > 0.5, m > 0.0);
    }
}

#[test]
fn truncated_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    let model = p(dir.path(), "m.json");
    ok(&["synth", "--out", &data]);
    ok(&["train", "--data", &data, "--lambda", "1", "--depth", "2", "--out", &model]);
    let text = std::fs::read_to_string(&model).unwrap();
    std::fs::write(&model, &text[..text.len() / 2]).unwrap();
    let out = tsb(&["predict", "--model", &model, "--data", &data, "--out", &p(dir.path(), "p.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: data:"));
}

#[test]
fn bad_cell_reports_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    std::fs::write(&data, "a,b,label\n1,2,1\n3,x,-1\n").unwrap();
    let out = tsb(&["train", "--data", &data, "--lambda", "1", "--out", &p(dir.path(), "m.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("column 2"), "{err}");
}

#[test]
fn usage_errors_exit_with_one() {
    let out = tsb(&["train", "--lambda", "-1", "--data", "x.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: usage:"));
    assert_eq!(tsb(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tsb(&["--help"]).status.code(), Some(0));
}

#[test]
fn leaf_selector_matching_nothing_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    ok(&["synth", "--out", &data]);
    let out = tsb(&[
        "leaf-weights", "--data", &data, "--lambda", "2", "--depth", "2", "--leaf", "X1>100 & X2<=-100", "--out",
        &p(dir.path(), "w.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
