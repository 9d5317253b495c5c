use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sadkl_core::burr::{burr_sample, BurrParams};

const SMALL: &[&str] = &[
    "--n-samples",
    "400",
    "--labeled-frac",
    "0.2",
    "--unlabeled-anom-frac",
    "0.02",
    "--test-samples",
    "200",
    "--test-anomalies",
    "50",
    "--lof-k",
    "15",
    "--hidden",
    "16",
    "--pretrain-epochs",
    "5",
    "--batch-size",
    "50",
    "--lr",
    "1e-3",
];

fn sadkl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sadkl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sadkl(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SMALL.iter().copied()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The single run directory created under `base`.
fn only_run_dir(base: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(base)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn gen_data(dir: &Path) -> (PathBuf, PathBuf) {
    let (train, test) = (dir.join("train.csv"), dir.join("test.csv"));
    ok(&with_small(&[
        "gen-data",
        "--out",
        s(&train),
        "--test-out",
        s(&test),
    ]));
    (train, test)
}

#[test]
fn gen_data_is_deterministic_and_seed_dependent() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = gen_data(dir.path());
    let b = dir.path().join("again.csv");
    ok(&with_small(&["gen-data", "--out", s(&b)]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("other.csv");
    ok(&with_small(&["gen-data", "--out", s(&c), "--seed", "1"]));
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn gen_data_without_paths_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    ok(&with_small(&["gen-data", "--output-dir", s(&runs)]));
    let run = only_run_dir(&runs);
    assert!(run
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .starts_with("gen-data-"));
    for f in ["train.csv", "test.csv", "config.toml"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let config = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(config.contains("n_samples = 400"), "{config}");
}

#[test]
fn train_then_eval_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = gen_data(dir.path());
    let runs = dir.path().join("train-runs");
    let summary = ok(&with_small(&[
        "train",
        "--data",
        s(&train),
        "--max-iterations",
        "1",
        "--output-dir",
        s(&runs),
    ]));
    assert!(summary.starts_with("iterations 1 "), "{summary}");
    let run = only_run_dir(&runs);
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2, "{history}");
    assert!(history.starts_with("t,eta,delta,mean_loss,train_auc\n1,"));
    for f in ["model.ckpt", "pretrain.csv", "summary.txt", "config.toml"] {
        assert!(run.join(f).is_file(), "{f}");
    }

    let model = run.join("model.ckpt");
    let eval_dirs = [dir.path().join("eval-a"), dir.path().join("eval-b")];
    let mut outputs = Vec::new();
    for out_dir in &eval_dirs {
        let stdout = ok(&[
            "eval",
            "--checkpoint",
            s(&model),
            "--data",
            s(&test),
            "--output-dir",
            s(out_dir),
            "--resolution",
            "40",
        ]);
        let auc: f64 = stdout
            .lines()
            .next()
            .unwrap()
            .strip_prefix("auc ")
            .unwrap()
            .parse()
            .unwrap();
        assert!((0.0..=1.0).contains(&auc));
        let run = only_run_dir(out_dir);
        let files: Vec<Vec<u8>> = ["roc.csv", "roc.svg", "boundary.csv", "boundary.svg"]
            .iter()
            .map(|f| fs::read(run.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    let grid = String::from_utf8(outputs[0][2].clone()).unwrap();
    assert_eq!(grid.lines().count(), 2 + 40 * 40);

    let retrain = dir.path().join("retrain");
    ok(&with_small(&[
        "train",
        "--data",
        s(&train),
        "--max-iterations",
        "1",
        "--output-dir",
        s(&retrain),
    ]));
    let again = only_run_dir(&retrain);
    assert_eq!(
        fs::read(run.join("model.ckpt")).unwrap(),
        fs::read(again.join("model.ckpt")).unwrap()
    );
}

#[test]
fn pretrain_writes_a_usable_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = gen_data(dir.path());
    let runs = dir.path().join("runs");
    ok(&with_small(&[
        "pretrain",
        "--data",
        s(&train),
        "--output-dir",
        s(&runs),
    ]));
    let pre = only_run_dir(&runs);
    for f in [
        "encoder.ckpt",
        "pretrain.csv",
        "scores_normal.csv",
        "scores_unlabeled.csv",
    ] {
        assert!(pre.join(f).is_file(), "{f}");
    }
    let mse = fs::read_to_string(pre.join("pretrain.csv")).unwrap();
    assert_eq!(mse.lines().count(), 1 + 6);

    let kl = ok(&[
        "kl",
        "--p",
        s(&pre.join("scores_normal.csv")),
        "--q",
        s(&pre.join("scores_unlabeled.csv")),
    ]);
    assert!(kl.lines().nth(1).unwrap().starts_with("p_d "), "{kl}");

    let trained = dir.path().join("trained");
    let summary = ok(&with_small(&[
        "train",
        "--data",
        s(&train),
        "--init",
        s(&pre.join("encoder.ckpt")),
        "--max-iterations",
        "1",
        "--output-dir",
        s(&trained),
    ]));
    assert!(summary.starts_with("iterations 1 "));
    assert!(!only_run_dir(&trained).join("pretrain.csv").exists());
}

#[test]
fn fit_burr_recovers_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.csv");
    let xs = burr_sample(10_000, BurrParams::new(2.0, 3.0).unwrap(), 1).unwrap();
    let text: String = xs.iter().map(|x| format!("{x:e}\n")).collect();
    fs::write(&path, text).unwrap();
    let out = ok(&["fit-burr", "--scores", s(&path)]);
    let field = |name: &str| -> f64 {
        let mut it = out.split_whitespace();
        it.find(|w| *w == name).unwrap();
        it.next().unwrap().parse().unwrap()
    };
    assert!((1.9..=2.1).contains(&field("c")), "{out}");
    assert!((2.7..=3.3).contains(&field("k")), "{out}");
    assert!(field("p_value") > 0.05, "{out}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        sadkl(&["fit-burr", "--scores", s(&missing)]).status.code(),
        Some(2)
    );

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1.0\n-2.0\n3.0\n").unwrap();
    let out = sadkl(&["fit-burr", "--scores", s(&bad)]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    fs::write(&bad, "").unwrap();
    assert_eq!(
        sadkl(&["fit-burr", "--scores", s(&bad)]).status.code(),
        Some(1)
    );

    let same = dir.path().join("same.csv");
    fs::write(&same, "2.0\n".repeat(50)).unwrap();
    assert_eq!(
        sadkl(&["fit-burr", "--scores", s(&same)]).status.code(),
        Some(3)
    );

    let out = dir.path().join("x.csv");
    let code = sadkl(&["gen-data", "--out", s(&out), "--labeled-frac", "1.5"])
        .status
        .code();
    assert_eq!(code, Some(1));
    let stderr =
        String::from_utf8(sadkl(&["gen-data", "--out", s(&out), "--labeled-frac", "1.5"]).stderr)
            .unwrap();
    assert!(stderr.contains("labeled_frac"), "{stderr}");

    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(
        sadkl(&["gen-data", "--out", s(&out), "--config", s(&cfg)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn eval_rejects_single_class_and_mismatched_data() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = gen_data(dir.path());
    let runs = dir.path().join("runs");
    ok(&with_small(&[
        "pretrain",
        "--data",
        s(&train),
        "--output-dir",
        s(&runs),
    ]));
    let ckpt = only_run_dir(&runs).join("encoder.ckpt");

    let normal_only = dir.path().join("normal.csv");
    ok(&[
        "gen-data",
        "--out",
        s(&normal_only),
        "--n-samples",
        "100",
        "--labeled-anom-frac",
        "0",
        "--unlabeled-anom-frac",
        "0",
    ]);
    let out = sadkl(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&normal_only),
        "--output-dir",
        s(&runs),
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "f0,f1,f2,label_state,ground_truth,y\n0,0,0,unlabeled,normal,0.5\n1,1,1,unlabeled,abnormal,0.5\n").unwrap();
    let out = sadkl(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&wide),
        "--output-dir",
        s(&runs),
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
