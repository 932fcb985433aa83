//! Black-box checks of the binary: artifact layout, exit codes, and
//! run-to-run determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn blogrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blogrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = blogrec(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> i32 {
    blogrec(args).status.code().expect("no signal")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

/// Generates a small corpus under `dir` and returns the two input paths.
fn small_corpus(dir: &Path) -> (String, String) {
    let out = dir.join("corpus");
    run_ok(&[
        "synth",
        "--users", "200",
        "--blogs", "40",
        "--apps", "10",
        "--topics", "4",
        "--seed", "9",
        "--out", out.to_str().unwrap(),
    ]);
    (
        out.join("follows.tsv").to_str().unwrap().to_string(),
        out.join("apps.tsv").to_str().unwrap().to_string(),
    )
}

#[test]
fn synth_writes_corpus_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (follows, apps) = small_corpus(tmp.path());
    assert!(Path::new(&follows).exists());
    assert!(Path::new(&apps).exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("corpus"), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["users"], 200);
    // corpus lines look like name<TAB>name
    let first = read(&tmp.path().join("corpus"), "follows.tsv");
    let mut fields = first.lines().next().unwrap().split('\t');
    assert!(fields.next().unwrap().starts_with('u'));
    assert!(fields.next().unwrap().starts_with('b'));
}

#[test]
fn ingest_round_trips_and_counts_anomalies() {
    let tmp = tempfile::tempdir().unwrap();
    let follows = tmp.path().join("follows.tsv");
    let apps = tmp.path().join("apps.tsv");
    // one duplicate edge, one usage row for a user with no follows
    fs::write(&follows, "ann\tcooking\nann\tcooking\nbob\tbikes\n").unwrap();
    fs::write(&apps, "ann\tcamera\t3\nzoe\tcamera\t9\nbob\tmaps\t1\n").unwrap();

    let out = tmp.path().join("ingested");
    run_ok(&[
        "ingest",
        "--follows", follows.to_str().unwrap(),
        "--apps", apps.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);

    assert_eq!(read(&out, "follows.tsv"), "ann\tcooking\nbob\tbikes\n");
    assert_eq!(read(&out, "vocab_users.tsv"), "ann\nbob\n");
    assert_eq!(read(&out, "app_usage.tsv"), "ann\tcamera\t3\nbob\tmaps\t1\n");

    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["notes"]["duplicate_follow_edges"], 1);
    assert_eq!(manifest["notes"]["dropped_unknown_users"], 1);
    assert_eq!(manifest["notes"]["follow_edges"], 2);
}

#[test]
fn stats_writes_histograms_and_heatmap() {
    let tmp = tempfile::tempdir().unwrap();
    let (follows, apps) = small_corpus(tmp.path());
    let out = tmp.path().join("stats");
    run_ok(&[
        "stats",
        "--follows", &follows,
        "--apps", &apps,
        "--heatmap-apps", "4",
        "--heatmap-blogs", "6",
        "--out", out.to_str().unwrap(),
    ]);

    for name in [
        "degree_hist_blog-followers.csv",
        "degree_hist_user-followees.csv",
        "degree_hist_app-users.csv",
        "degree_hist_user-apps.csv",
    ] {
        let body = read(&out, name);
        assert!(body.starts_with("bucket,count\n"), "{name} header");
    }
    let heatmap = read(&out, "cross_heatmap.csv");
    assert_eq!(heatmap.lines().count(), 5, "header plus one row per app");
    assert_eq!(heatmap.lines().next().unwrap().split(',').count(), 7);
}

#[test]
fn heatmap_dims_clamp_to_catalog() {
    let tmp = tempfile::tempdir().unwrap();
    let (follows, apps) = small_corpus(tmp.path());
    let out = tmp.path().join("stats");
    run_ok(&[
        "stats",
        "--follows", &follows,
        "--apps", &apps,
        "--heatmap-apps", "999",
        "--heatmap-blogs", "999",
        "--out", out.to_str().unwrap(),
    ]);
    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["notes"]["heatmap_apps_effective"], 10);
    assert_eq!(manifest["notes"]["heatmap_blogs_effective"], 40);
}

#[test]
fn train_writes_model_and_loss_log() {
    let tmp = tempfile::tempdir().unwrap();
    let (follows, apps) = small_corpus(tmp.path());
    let out = tmp.path().join("model");
    run_ok(&[
        "train",
        "--follows", &follows,
        "--apps", &apps,
        "--model", "app-fm",
        "--epochs", "3",
        "--out", out.to_str().unwrap(),
    ]);

    let model = read(&out, "model.txt");
    assert!(model.starts_with("fm v1\nencoding app-fm\n"));
    let log = read(&out, "training_log.csv");
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch,loss");
    assert_eq!(lines.len(), 4, "header plus one row per epoch");
    // loss should move in the right direction even on a toy run
    let loss = |line: &str| line.split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert!(loss(lines[3]) < loss(lines[1]));
}

#[test]
fn evaluate_reports_every_requested_model() {
    let tmp = tempfile::tempdir().unwrap();
    let (follows, apps) = small_corpus(tmp.path());
    let out = tmp.path().join("eval");
    run_ok(&[
        "evaluate",
        "--follows", &follows,
        "--apps", &apps,
        "--model", "pop,itemcf-app",
        "--epochs", "2",
        "--out", out.to_str().unwrap(),
    ]);

    for name in ["train.tsv", "test.tsv", "candidates.tsv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let comparison = read(&out, "comparison.csv");
    let lines: Vec<&str> = comparison.lines().collect();
    assert_eq!(lines[0], "model,p@1,p@5,p@10,mrr,users");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("pop,"));
    assert!(lines[2].starts_with("itemcf-app,"));

    let significance = read(&out, "significance.csv");
    assert_eq!(significance.lines().count(), 2, "header plus one pair");

    let report: serde_json::Value =
        serde_json::from_str(&read(&out, "report_itemcf-app.json")).unwrap();
    assert_eq!(report["model"], "itemcf-app");
    assert!(report["buckets"].as_object().is_some());

    let buckets = read(&out, "buckets_pop.csv");
    assert_eq!(buckets.lines().next().unwrap(), "bucket,count,p@1,p@5,p@10,mrr");

    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert!(manifest["notes"]["alpha_itemcf-app"].is_number());
}

#[test]
fn equal_runs_produce_equal_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (follows, apps) = small_corpus(tmp.path());
    let args = |out: &str| {
        [
            "evaluate".to_string(),
            "--follows".into(), follows.clone(),
            "--apps".into(), apps.clone(),
            "--model".into(), "pop,itemcf,mf".into(),
            "--epochs".into(), "2".into(),
            "--out".into(), out.to_string(),
        ]
    };
    for out in ["a", "b"] {
        let owned = args(tmp.path().join(out).to_str().unwrap());
        let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
        run_ok(&refs);
    }

    let dir_a = tmp.path().join("a");
    let mut names: Vec<String> = fs::read_dir(&dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in names {
        let a = fs::read(dir_a.join(&name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let (follows, _) = small_corpus(tmp.path());
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();

    // unknown model name
    assert_eq!(
        exit_code(&["evaluate", "--follows", &follows, "--model", "svd", "--out", out]),
        2
    );
    // app models without app data
    assert_eq!(
        exit_code(&["evaluate", "--follows", &follows, "--model", "app-fm", "--out", out]),
        2
    );
    // cut that would drop every app
    assert_eq!(
        exit_code(&["ingest", "--follows", &follows, "--top-apps", "0", "--out", out]),
        2
    );
    // blend weight outside [0, 1]
    assert_eq!(
        exit_code(&[
            "evaluate", "--follows", &follows, "--model", "pop", "--alpha", "1.5", "--out", out,
        ]),
        2
    );
}

#[test]
fn data_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.tsv");
    let out = tmp.path().join("x");
    let run = blogrec(&[
        "evaluate",
        "--follows", missing.to_str().unwrap(),
        "--model", "pop",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("nope.tsv"), "error names the file: {stderr}");

    // malformed row: missing the blog column
    let bad = tmp.path().join("bad.tsv");
    fs::write(&bad, "ann\n").unwrap();
    assert_eq!(
        exit_code(&["ingest", "--follows", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        3
    );
}

#[test]
fn divergent_training_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let (follows, _) = small_corpus(tmp.path());
    let out = tmp.path().join("x");
    assert_eq!(
        exit_code(&[
            "train",
            "--follows", &follows,
            "--model", "mf",
            "--lr", "50",
            "--epochs", "30",
            "--out", out.to_str().unwrap(),
        ]),
        4
    );
}
