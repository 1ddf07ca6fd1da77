use std::fs;
use std::path::Path;

use rnnquant::cli::{main_with_args, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_OTHER};

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["rnnquant"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const SMALL: [&str; 6] = [
    "--set",
    "synth.symbols=12",
    "--set",
    "synth.weeks=200",
    "--set",
    "synth.signal=0.8",
];

#[test]
fn synth_is_reproducible_and_sized() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let mut args = vec![
            "synth",
            "--seed",
            "11",
            "--out",
            dir.path().to_str().unwrap(),
        ];
        args.extend_from_slice(&SMALL);
        assert_eq!(run(&args), EXIT_OK);
    }
    let bars = read(a.path(), "bars.csv");
    assert_eq!(bars.lines().count(), 1 + 12 * 200);
    assert_eq!(bars, read(b.path(), "bars.csv"));
}

#[test]
fn train_writes_history_and_config_replays() {
    let a = tempfile::tempdir().unwrap();
    let out = a.path().to_str().unwrap();
    let mut args = vec![
        "train",
        "--out",
        out,
        "--set",
        "model=gru(4)>dense(1,linear)",
        "--set",
        "window=6",
    ];
    args.extend_from_slice(&SMALL);
    assert_eq!(run(&args), EXIT_OK);
    let history = read(a.path(), "history.csv");
    assert_eq!(
        history.lines().next(),
        Some("epoch,train_loss,val_loss,dir_acc")
    );
    assert_eq!(history.lines().count(), 21);
    assert!(a.path().join("normalizer.json").exists());

    let b = tempfile::tempdir().unwrap();
    let config = a.path().join("config.txt");
    let code = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(history, read(b.path(), "history.csv"));
    assert_eq!(
        read(a.path(), "checkpoint.txt"),
        read(b.path(), "checkpoint.txt")
    );
}

#[test]
fn perfect_foresight_backtest_beats_benchmark() {
    let a = tempfile::tempdir().unwrap();
    let mut args = vec![
        "backtest",
        "--perfect-foresight",
        "--out",
        a.path().to_str().unwrap(),
        "--set",
        "backtest.top_k=3",
    ];
    args.extend_from_slice(&SMALL);
    assert_eq!(run(&args), EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&read(a.path(), "report.json")).unwrap();
    assert!(report["excess_return"].as_f64().unwrap() > 0.0);
    let equity = read(a.path(), "equity.csv");
    assert_eq!(equity.lines().next(), Some("date,strategy,benchmark"));
    assert!(equity.lines().nth(1).unwrap().ends_with(",1,1"));
    assert!(read(a.path(), "weights.csv").lines().count() > 1);
}

#[test]
fn gradcheck_exit_codes() {
    let a = tempfile::tempdir().unwrap();
    let out = a.path().to_str().unwrap();
    assert_eq!(run(&["gradcheck", "--out", out]), EXIT_OK);
    assert_eq!(
        run(&["gradcheck", "--out", out, "--inject-fault"]),
        EXIT_NUMERIC
    );
    assert_eq!(
        run(&["gradcheck", "--out", out, "--set", "gradcheck.eps=1e-2"]),
        EXIT_CONFIG
    );
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let a = tempfile::tempdir().unwrap();
    let out = a.path().to_str().unwrap();
    assert_eq!(
        run(&["synth", "--out", out, "--set", "synth.symbols=1"]),
        EXIT_CONFIG
    );
    assert_eq!(
        run(&["synth", "--out", out, "--set", "no.such.key=3"]),
        EXIT_CONFIG
    );
    assert_eq!(
        run(&["train", "--out", out, "--set", "data=/nonexistent/bars.csv"]),
        EXIT_OTHER
    );

    let bad = a.path().join("bad.csv");
    fs::write(
        &bad,
        "date,symbol,open,high,low,close,volume\nnot-a-date,A,1,1,1,1,1\n",
    )
    .unwrap();
    let data = format!("data={}", bad.display());
    assert_eq!(run(&["backtest", "--out", out, "--set", &data]), EXIT_DATA);
}
