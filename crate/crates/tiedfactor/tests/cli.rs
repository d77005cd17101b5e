use std::path::Path;
use std::process::{Command, Output};

use tiedfactor::archive::read_archive;
use tiedfactor::model::load_ubm;
use tiedfactor::scores::{read_score_table, read_trials, score_set};
use tiedfactor_core::metrics::{eer, min_dcf};
use tiedfactor_core::trainer::init;
use tiedfactor_core::{Architecture, CostParams, Label, ScoreSet, TrainConfig};

const SYNTH: &[&str] = &[
    "--dim",
    "6",
    "--speakers",
    "4",
    "--sessions-per-speaker",
    "5",
    "--frames-per-session",
    "30",
    "--true-speaker-rank",
    "2",
    "--true-session-rank",
    "2",
];

const NET: &[&str] = &[
    "--hidden",
    "8",
    "--depth",
    "1",
    "--bottleneck",
    "3",
    "--session-rank",
    "2",
    "--speaker-rank",
    "2",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiedfactor"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    let mut args = vec!["synth", "--out", p(dir), "--seed", seed];
    args.extend_from_slice(SYNTH);
    ok(&args);
}

fn train(data: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["train-ubm", "--data", p(data), "--out", p(out)];
    if !extra.contains(&"--epochs") {
        args.extend_from_slice(&["--epochs", "2"]);
    }
    args.extend_from_slice(NET);
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn synth_is_reproducible_and_counts_trials() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), "7");
    synth(b.path(), "7");
    for f in ["train.tfda", "enrol.tfda", "test.tfda", "trials.tsv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let trials = read_trials(&a.path().join("trials.tsv")).unwrap();
    let (s, tests) = (4, 2);
    let tgt = trials.iter().filter(|t| t.label == Label::Target).count();
    let non = trials
        .iter()
        .filter(|t| t.label == Label::Nontarget)
        .count();
    assert_eq!((tgt, non), (s * tests, s * (s - 1) * tests));
    let train = read_archive(&a.path().join("train.tfda")).unwrap();
    assert_eq!(train.len(), 4 * 2 * 30);
}

#[test]
fn usage_errors_exit_with_two_and_write_nothing() {
    let out = run(&["synth", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--out", p(dir.path()), "--speakers", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    let out = run(&[
        "score",
        "--ubm",
        "a",
        "--models",
        "b",
        "--data",
        "c",
        "--trials",
        "d",
        "--out",
        "e",
        "--mc-dropout",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train-ubm",
        "--data",
        p(&dir.path().join("nope.tfda")),
        "--out",
        p(&dir.path().join("u")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tfda"));
    assert!(!dir.path().join("u").exists());
}

#[test]
fn negligible_learning_rate_leaves_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "3");
    let model = dir.path().join("ubm.tfm");
    train(
        &dir.path().join("train.tfda"),
        &model,
        &["--epochs", "1", "--lr-theta", "1e-12", "--train-seed", "5"],
    );
    let ubm = load_ubm(&model).unwrap();
    let mut cfg = TrainConfig::new(Architecture::symmetric(6, 8, 1, 3, 2, 2));
    cfg.seed = 5;
    let (start, _) = init(&cfg, 8, 4).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in ubm.params.tensors().iter().zip(start.tensors()) {
        for (x, y) in a.iter().zip(b.iter()) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst < 1e-6, "moved by {worst}");
}

#[test]
fn training_is_bit_reproducible_and_writes_a_loss_trace() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "4");
    let data = dir.path().join("train.tfda");
    let (a, b) = (dir.path().join("a.tfm"), dir.path().join("b.tfm"));
    let trace = dir.path().join("loss.tsv");
    train(&data, &a, &["--loss-trace", p(&trace)]);
    train(&data, &b, &[]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("1\t"));
    let dnn = dir.path().join("dnn.tfm");
    train(&data, &dnn, &["--baseline-dnn"]);
    assert!(!load_ubm(&dnn).unwrap().params.has_factors());
}

fn pipeline(dir: &Path) {
    synth(dir, "9");
    train(&dir.join("train.tfda"), &dir.join("ubm.tfm"), &[]);
}

fn owned(dir: &Path, head: &[(&str, &str)], extra: &[&str]) -> Vec<String> {
    let mut v = Vec::new();
    for (i, (flag, file)) in head.iter().enumerate() {
        if i == 0 {
            v.push(flag.to_string());
        } else {
            v.push(flag.to_string());
            v.push(p(&dir.join(file)).to_string());
        }
    }
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn enrol(dir: &Path, out: &str, extra: &[&str]) {
    let args = owned(
        dir,
        &[
            ("enrol", ""),
            ("--ubm", "ubm.tfm"),
            ("--data", "enrol.tfda"),
            ("--out", out),
        ],
        extra,
    );
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&args);
}

fn score(dir: &Path, models: &str, out: &str, extra: &[&str]) -> Output {
    let args = owned(
        dir,
        &[
            ("score", ""),
            ("--ubm", "ubm.tfm"),
            ("--data", "test.tfda"),
            ("--trials", "trials.tsv"),
            ("--models", models),
            ("--out", out),
        ],
        extra,
    );
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&args)
}

#[test]
fn enrol_score_eval_round() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    pipeline(dir);

    enrol(dir, "null.tfm", &["--alpha", "1"]);
    assert!(score(dir, "null.tfm", "null.tsv", &[]).status.success());
    let null = read_score_table(&dir.join("null.tsv")).unwrap();
    assert_eq!(null.len(), 4 * 2 * 4);
    assert!(null.iter().all(|l| l.score == 0.0));

    enrol(dir, "spk.tfm", &["--stats-out", p(&dir.join("stats.tfm"))]);
    assert!(dir.join("stats.tfm").exists());
    assert!(score(dir, "spk.tfm", "det.tsv", &[]).status.success());
    assert!(score(dir, "spk.tfm", "mc0.tsv", &["--mc-dropout", "0"])
        .status
        .success());
    assert_eq!(
        std::fs::read(dir.join("det.tsv")).unwrap(),
        std::fs::read(dir.join("mc0.tsv")).unwrap()
    );
    assert!(score(
        dir,
        "spk.tfm",
        "mc.tsv",
        &["--mc-dropout", "0.1", "--mc-samples", "4"]
    )
    .status
    .success());
    assert!(score(
        dir,
        "spk.tfm",
        "mc_again.tsv",
        &["--mc-dropout", "0.1", "--mc-samples", "4", "--threads", "2"]
    )
    .status
    .success());
    assert_eq!(
        std::fs::read(dir.join("mc.tsv")).unwrap(),
        std::fs::read(dir.join("mc_again.tsv")).unwrap()
    );

    let det = dir.join("det_points.tsv");
    let out = ok(&[
        "eval",
        "--scores",
        p(&dir.join("det.tsv")),
        "--det",
        p(&det),
    ]);
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with("EER% "), "{line}");
    assert!(std::fs::read_to_string(&det).unwrap().lines().count() > 2);

    enrol(
        dir,
        "fac.tfm",
        &["--method", "factor", "--factor-iterations", "3"],
    );
    assert!(score(dir, "fac.tfm", "fac.tsv", &[]).status.success());
}

#[test]
fn failed_trials_leave_no_score_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    pipeline(dir);
    enrol(dir, "spk.tfm", &[]);
    let trials = dir.join("trials.tsv");
    let mut text = std::fs::read_to_string(&trials).unwrap();
    text.push_str("ghost\tutt0\ttgt\n");
    std::fs::write(&trials, text).unwrap();
    let out = score(dir, "spk.tfm", "scores.tsv", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model ghost"));
    assert!(!dir.join("scores.tsv").exists());
    // a speaker model file is not a UBM
    let out = run(&[
        "enrol",
        "--ubm",
        p(&dir.join("spk.tfm")),
        "--data",
        p(&dir.join("enrol.tfda")),
        "--out",
        p(&dir.join("x.tfm")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected a ubm file"));
}

#[test]
fn mismatched_dimensions_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    pipeline(dir);
    let other = dir.join("other");
    let mut args = vec!["synth", "--out", p(&other), "--seed", "1"];
    let mut flags: Vec<&str> = SYNTH.to_vec();
    flags[1] = "5";
    args.extend_from_slice(&flags);
    ok(&args);
    let out = run(&[
        "enrol",
        "--ubm",
        p(&dir.join("ubm.tfm")),
        "--data",
        p(&other.join("enrol.tfda")),
        "--out",
        p(&dir.join("x.tfm")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension 5, model expects 6"));
}

#[test]
fn eval_matches_the_metric_oracle_on_a_hand_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.tsv");
    std::fs::write(
        &path,
        "spk0\tutt0\t2.0\ttgt\nspk0\tutt1\t0.5\tnon\nspk1\tutt0\t1.0\ttgt\nspk1\tutt1\t1.5\tnon\n",
    )
    .unwrap();
    let out = ok(&["eval", "--scores", p(&path)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let f: Vec<&str> = text.split_whitespace().collect();
    assert_eq!((f[0], f[2], f[4]), ("EER%", "minDCF08", "minDCF10"));
    let set = ScoreSet::new(vec![2.0, 1.0], vec![0.5, 1.5]);
    assert_eq!(f[1].parse::<f64>().unwrap(), 50.0);
    assert_eq!(f[1].parse::<f64>().unwrap(), 100.0 * eer(&set).unwrap());
    assert_eq!(
        f[3].parse::<f64>().unwrap(),
        min_dcf(&set, &CostParams::DET08).unwrap()
    );
    assert_eq!(
        f[5].parse::<f64>().unwrap(),
        min_dcf(&set, &CostParams::DET10).unwrap()
    );
    assert_eq!(score_set(&read_score_table(&path).unwrap()), set);
}

#[test]
fn import_reads_tab_separated_frames() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("f.tsv");
    std::fs::write(&tsv, "0\t0\t1.5\t-2\n1\t1\t0.25\t3e-3\n").unwrap();
    let out = dir.path().join("f.tfda");
    ok(&["import", "--tsv", p(&tsv), "--out", p(&out)]);
    let d = read_archive(&out).unwrap();
    assert_eq!(
        (d.len(), d.dim(), d.num_sessions(), d.num_speakers()),
        (2, 2, 2, 2)
    );
    assert_eq!(d.frame(1), &[0.25, 3e-3]);
}

#[test]
fn bench_grid_of_one_point_is_a_reproducible_two_row_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.tsv");
    let mut args = vec!["bench", "--grid", "2x1", "--epochs", "2", "--out", p(&out)];
    args.extend_from_slice(SYNTH);
    args.extend_from_slice(&NET[..6]);
    let first = ok(&args);
    let second = ok(&args);
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("DNN\t2\t1\t"));
    assert!(rows[1].starts_with("TF2-DNN\t2\t1\t"));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
}

#[test]
fn help_lists_the_defaults() {
    let out = ok(&["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Defaults:"));
    assert!(text.contains("--lr-theta"));
}
