use std::path::Path;
use std::process::{Command, Output};

fn mrnn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrnn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) {
    std::fs::write(
        dir.join("small.json"),
        r#"{"sequences": 60, "length": 8, "epochs": 1, "repeats": 2, "hidden": 3, "batch": 8}"#,
    )
    .unwrap();
}

#[test]
fn generate_train_evaluate_compare_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);

    let out = mrnn(&["generate-data", "--config", "small.json", "--out", "data"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("data/synthetic.csv").exists());

    let out = mrnn(
        &["train", "--config", "small.json", "--data", "data/synthetic.csv", "--out", "run", "--mixture", "none,bucketed"],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    let models: Vec<&str> = table.lines().skip(1).filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(models, ["lstm", "pm-lstm"]);
    for f in ["report.csv", "summary.csv", "summary.txt", "runs.json", "manifest.txt", "checkpoints/pm-lstm-r2.ckpt"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(d.join("run/report.csv")).unwrap();
    assert!(report.starts_with("model,repeat,epoch,train_loss,eval_metric,dispersion"));

    let out = mrnn(
        &["evaluate", "run/checkpoints/lstm-r1.ckpt", "--config", "small.json", "--data", "data/synthetic.csv"],
        d,
    );
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("mae "));

    let out = mrnn(&["compare", "run", "--out", "cmp.csv"], d);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(d.join("cmp.csv")).unwrap(),
        std::fs::read_to_string(d.join("run/summary.csv")).unwrap()
    );

    let before = std::fs::read(d.join("run/report.csv")).unwrap();
    let out = mrnn(&["report", "run"], d);
    assert!(out.status.success());
    assert_eq!(std::fs::read(d.join("run/report.csv")).unwrap(), before);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    let code = |args: &[&str]| mrnn(args, d).status.code();

    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["train", "--lr", "-1"]), Some(1));
    assert_eq!(code(&["train", "--mixture", "sometimes"]), Some(1));
    assert_eq!(code(&["train", "--no-such-flag"]), Some(1));
    assert_eq!(code(&["train", "--task", "timeseries-csv"]), Some(1));
    assert_eq!(code(&["evaluate", "small.json", "--config", "small.json"]), Some(2));
    assert_eq!(code(&["compare", "missing/runs.json"]), Some(2));
    assert_eq!(code(&["train", "--config", "small.json", "--data", "missing.csv"]), Some(2));
}
