use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn splitsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitsgd"))
        .args(args)
        .env_remove("SPLITSGD_THREADS")
        .output()
        .expect("binary runs")
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (String, String) {
    let out = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let out_str = out.to_str().unwrap().to_string();
    full.extend(["--out", &out_str]);
    let res = splitsgd(&full);
    assert!(
        res.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(&out).unwrap();
    let meta = fs::read_to_string(format!("{out_str}.meta")).unwrap();
    (csv, meta)
}

#[test]
fn qrisk_prints_probability() {
    let out = splitsgd(&["qrisk", "--w", "20", "--q", "0.4"]);
    assert!(out.status.success());
    let p: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((p - 0.1316).abs() < 1e-4);
    let out = splitsgd(&["qrisk", "--w", "5", "--q", "0"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(
        splitsgd(&["compare", "--methods", "adam"]).status.code(),
        Some(2)
    );
    assert_eq!(splitsgd(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(splitsgd(&["qrisk", "--q", "1.5"]).status.code(), Some(2));
    assert_eq!(
        splitsgd(&["sensitivity", "--ws", "7", "--seeds", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn compare_rows_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "compare",
        "--etas",
        "1e-3,0.5",
        "--seeds",
        "2",
        "--epochs",
        "6",
        "--methods",
        "const,splitsgd",
    ];
    let (csv, meta) = run_to(dir.path(), "c.csv", &args);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,eta,seed,final_log_loss");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1].starts_with("const,0.001,0,"));
    assert!(lines
        .iter()
        .any(|l| l.starts_with("const,0.5,") && l.ends_with(",inf")));
    assert!(meta.starts_with("command=compare\n"));
    assert!(meta.contains("schema_version=1\n"));
    assert!(meta.contains("epochs=6\n"));
    assert!(meta.contains("methods=const,splitsgd\n"));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# quick\nepochs = 3\nseeds = 1\netas = 0.01\nmethods = const\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let (csv, meta) = run_to(
        dir.path(),
        "a.csv",
        &["compare", "--config", cfg, "--seeds", "2"],
    );
    assert_eq!(csv.lines().count(), 3);
    assert!(meta.contains("epochs=3\n") && meta.contains("seeds=2\n"));

    fs::write(dir.path().join("bad.cfg"), "epochz=3\n").unwrap();
    let bad = dir.path().join("bad.cfg");
    let res = splitsgd(&["compare", "--config", bad.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn race_has_two_rows_per_rep() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, meta) = run_to(
        dir.path(),
        "r.csv",
        &["race", "--reps", "3", "--max-epochs", "30"],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "rep,method,detection_epoch_or_cap,capped");
    assert_eq!(lines.len(), 7);
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        if cols[1] == "split" {
            // first diagnostic ends after t₁ + 1 epochs
            assert!(cols[2].parse::<f64>().unwrap() >= 5.0);
        }
    }
    assert!(meta.contains("eta=0.01\n"));
}

#[test]
fn mc_values_are_bounded_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mc", "--reps", "20", "--seed", "4"];
    let (a, meta) = run_to(dir.path(), "a.csv", &args);
    let (b, _) = run_to(dir.path(), "b.csv", &args);
    assert_eq!(a, b);
    assert_eq!(a.lines().next(), Some("replication,q_value,normalized"));
    assert_eq!(a.lines().count(), 21);
    for l in a.lines().skip(1) {
        let v: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        assert!((-1.0..=1.0).contains(&v));
    }
    assert!(meta.contains("regime=small-eta\n"));
}

#[test]
fn sensitivity_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sensitivity",
        "--ws",
        "10,20",
        "--qs",
        "0.4",
        "--etas",
        "1e-3",
        "--seeds",
        "2",
        "--epochs",
        "8",
    ];
    let (csv, _) = run_to(dir.path(), "s.csv", &args);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "w,q,eta,seed,final_log_loss");
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("10,0.4,0.001,0,"));
}

#[test]
fn gen_data_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = run_to(
        dir.path(),
        "d.csv",
        &["gen-data", "--problem", "logistic", "--n", "5", "--d", "3"],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x1,x2,x3,y");
    assert_eq!(lines.len(), 6);
    for l in &lines[1..] {
        let y = l.rsplit(',').next().unwrap();
        assert!(y == "0" || y == "1");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["compare", "--etas", "1e-2", "--seeds", "3", "--epochs", "6"];
    let (one, _) = run_to(
        dir.path(),
        "one.csv",
        &[&base[..], &["--threads", "1"]].concat(),
    );
    let (four, _) = run_to(
        dir.path(),
        "four.csv",
        &[&base[..], &["--threads", "4"]].concat(),
    );
    assert_eq!(one, four);
}
