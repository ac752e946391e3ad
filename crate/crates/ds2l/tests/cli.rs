//! End-to-end checks of the installed binary: every subcommand is exercised
//! through a real process, and outputs are compared byte-for-byte where
//! determinism is promised.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ds2l"))
}

/// Unique per-test scratch directory, removed on drop.
struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("ds2l-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn join(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.join(name)).unwrap()
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(cmd: &mut Command) -> (Option<i32>, String) {
    let out = cmd.output().unwrap();
    assert!(!out.status.success(), "command unexpectedly succeeded");
    (out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn synthetic_config(out_dir: &Path, extra: &str) -> String {
    format!(
        "n_per_class = 4\nc = 3\nd1 = 5\nd2 = 4\nnoise_sigma = 0.2\nseed = 9\n\
         output_dir = {}\n{extra}",
        out_dir.display()
    )
}

/// Hand-built model with P1 = P2 = I and zero means, so projections are the
/// raw features and both directions see the same geometry.
const IDENTITY_MODEL: &str = "DS2L-MODEL 1\n\
    2 2 2\n\
    1.0000000000000000e0 0.0000000000000000e0\n\
    0.0000000000000000e0 1.0000000000000000e0\n\
    1.0000000000000000e0 0.0000000000000000e0\n\
    0.0000000000000000e0 1.0000000000000000e0\n\
    0.0000000000000000e0 0.0000000000000000e0\n\
    0.0000000000000000e0 0.0000000000000000e0\n\
    1.0000000000000000e0 1.0000000000000000e0 1.0000000000000000e-2 \
    1.0000000000000000e-2 1.0000000000000000e0 1.0000000000000000e0\n";

#[test]
fn gen_data_writes_the_dataset_and_reruns_identically() {
    let scratch = Scratch::new("gen");
    let out1 = scratch.join("out1");
    let config = scratch.write("run.cfg", &synthetic_config(&out1, ""));

    run_ok(bin().arg("gen-data").arg("--config").arg(&config));

    let features1 = std::fs::read_to_string(out1.join("features1.csv")).unwrap();
    let rows: Vec<&str> = features1.lines().collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.split(',').count() == 5));

    let labels = std::fs::read_to_string(out1.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 12);
    for line in labels.lines() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields.iter().filter(|f| **f == "1").count(), 1);
        assert_eq!(fields.iter().filter(|f| **f == "0").count(), 2);
    }

    let manifest = std::fs::read_to_string(out1.join("manifest")).unwrap();
    assert!(manifest.contains("seed 9"), "manifest: {manifest}");
    assert!(manifest.contains("samples 12"), "manifest: {manifest}");

    // Same config, different output directory: byte-identical dataset.
    let out2 = scratch.join("out2");
    run_ok(
        bin()
            .arg("gen-data")
            .arg("--config")
            .arg(&config)
            .arg("--output")
            .arg(&out2),
    );
    let rerun = std::fs::read_to_string(out2.join("features1.csv")).unwrap();
    assert_eq!(features1, rerun);
}

#[test]
fn gen_data_rejects_feature_dimension_below_class_count() {
    let scratch = Scratch::new("gen-bad");
    let config = scratch.write(
        "run.cfg",
        &format!(
            "n_per_class = 4\nc = 3\nd1 = 2\nd2 = 4\nnoise_sigma = 0.2\n\
             output_dir = {}\n",
            scratch.join("out").display()
        ),
    );
    let (code, stderr) = run_err(bin().arg("gen-data").arg("--config").arg(&config));
    assert_eq!(code, Some(1));
    assert!(
        stderr.contains("modality dimension below class count"),
        "stderr: {stderr}"
    );
}

#[test]
fn train_writes_model_and_a_monotone_trace() {
    let scratch = Scratch::new("train");
    let out = scratch.join("out");
    let config = scratch.write(
        "run.cfg",
        &synthetic_config(&out, "k = 2\nmax_outer_iter = 8\ntrain_fraction = 0.75\n"),
    );

    run_ok(bin().arg("train").arg("--config").arg(&config));

    let model = std::fs::read_to_string(out.join("model.ds2l")).unwrap();
    assert!(model.starts_with("DS2L-MODEL 1\n"), "model header: {model:.40}");

    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iteration,objective"));
    let values: Vec<f64> = lines
        .enumerate()
        .map(|(i, line)| {
            let (iter, value) = line.split_once(',').unwrap();
            assert_eq!(iter.parse::<usize>().unwrap(), i);
            value.parse().unwrap()
        })
        .collect();
    assert!(!values.is_empty());
    for w in values.windows(2) {
        assert!(w[1] <= w[0] + 1e-8, "trace rose: {} -> {}", w[0], w[1]);
    }

    // 12 samples at 0.75 -> 9 train / 3 held out.
    let test_features = std::fs::read_to_string(out.join("test_features1.csv")).unwrap();
    assert_eq!(test_features.lines().count(), 3);
    assert_eq!(scratch.read("out/test_labels.csv").lines().count(), 3);

    // Reruns reproduce both artifacts byte-for-byte.
    let out2 = scratch.join("out2");
    run_ok(
        bin()
            .arg("train")
            .arg("--config")
            .arg(&config)
            .arg("--output")
            .arg(&out2),
    );
    assert_eq!(
        std::fs::read_to_string(out2.join("model.ds2l")).unwrap(),
        model
    );
    assert_eq!(
        std::fs::read_to_string(out2.join("trace.csv")).unwrap(),
        trace
    );
}

#[test]
fn eval_on_a_symmetric_model_scores_both_directions_equally() {
    let scratch = Scratch::new("eval");
    let model = scratch.write("model.ds2l", IDENTITY_MODEL);
    let features = "1,0\n0.9,0.1\n0,1\n0.1,0.9\n";
    let f1 = scratch.write("f1.csv", features);
    let f2 = scratch.write("f2.csv", features);
    let labels = scratch.write("y.csv", "1,0\n1,0\n0,1\n0,1\n");

    let stdout = run_ok(
        bin()
            .arg("eval")
            .arg("--model")
            .arg(&model)
            .arg("--features1")
            .arg(&f1)
            .arg("--features2")
            .arg(&f2)
            .arg("--labels")
            .arg(&labels),
    );
    let map_i2t = stdout
        .lines()
        .find_map(|l| l.strip_prefix("MAP_I2T "))
        .expect("MAP_I2T line");
    let map_t2i = stdout
        .lines()
        .find_map(|l| l.strip_prefix("MAP_T2I "))
        .expect("MAP_T2I line");
    assert_eq!(map_i2t, map_t2i, "full report:\n{stdout}");
    assert!(stdout.contains("MAP_AVG "), "full report:\n{stdout}");
    assert!(stdout.contains("CMC 1 "), "full report:\n{stdout}");

    // Identical features rank perfectly here: every score should be 1.
    assert!(
        stdout.contains("MAP_I2T 1.000000"),
        "full report:\n{stdout}"
    );

    let csv = run_ok(
        bin()
            .arg("eval")
            .arg("--model")
            .arg(&model)
            .arg("--features1")
            .arg(&f1)
            .arg("--features2")
            .arg(&f2)
            .arg("--labels")
            .arg(&labels)
            .arg("--format")
            .arg("csv"),
    );
    assert!(csv.starts_with("metric,value\n"), "csv:\n{csv}");
    assert!(csv.contains("CMC_1,"), "csv:\n{csv}");
}

#[test]
fn eval_reports_a_missing_file_by_path() {
    let scratch = Scratch::new("eval-missing");
    let missing = scratch.join("nope.ds2l");
    let f = scratch.write("f.csv", "1,0\n");
    let y = scratch.write("y.csv", "1,0\n");
    let (code, stderr) = run_err(
        bin()
            .arg("eval")
            .arg("--model")
            .arg(&missing)
            .arg("--features1")
            .arg(&f)
            .arg("--features2")
            .arg(&f)
            .arg("--labels")
            .arg(&y),
    );
    assert_eq!(code, Some(1));
    assert!(stderr.starts_with("error: "), "stderr: {stderr}");
    assert!(stderr.contains("nope.ds2l"), "stderr: {stderr}");
}

#[test]
fn retrieve_finds_each_query_in_the_gallery() {
    let scratch = Scratch::new("retrieve");
    let model = scratch.write("model.ds2l", IDENTITY_MODEL);
    let vectors = "1,0\n0,1\n1,1\n";
    let queries = scratch.write("q.csv", vectors);
    let gallery = scratch.write("g.csv", vectors);

    let stdout = run_ok(
        bin()
            .arg("retrieve")
            .arg("--model")
            .arg(&model)
            .arg("--queries")
            .arg(&queries)
            .arg("--gallery")
            .arg(&gallery)
            .arg("--direction")
            .arg("i2t")
            .arg("--top-k")
            .arg("1"),
    );
    assert_eq!(stdout, "0: 0:1.000000\n1: 1:1.000000\n2: 2:1.000000\n");

    let empty = run_ok(
        bin()
            .arg("retrieve")
            .arg("--model")
            .arg(&model)
            .arg("--queries")
            .arg(&queries)
            .arg("--gallery")
            .arg(&gallery)
            .arg("--direction")
            .arg("t2i")
            .arg("--top-k")
            .arg("0"),
    );
    assert_eq!(empty, "0:\n1:\n2:\n");
}

#[test]
fn retrieve_rejects_oversized_top_k_and_unknown_directions() {
    let scratch = Scratch::new("retrieve-bad");
    let model = scratch.write("model.ds2l", IDENTITY_MODEL);
    let vectors = "1,0\n0,1\n1,1\n";
    let queries = scratch.write("q.csv", vectors);
    let gallery = scratch.write("g.csv", vectors);

    let (code, stderr) = run_err(
        bin()
            .arg("retrieve")
            .arg("--model")
            .arg(&model)
            .arg("--queries")
            .arg(&queries)
            .arg("--gallery")
            .arg(&gallery)
            .arg("--direction")
            .arg("i2t")
            .arg("--top-k")
            .arg("4"),
    );
    assert_eq!(code, Some(1));
    assert!(
        stderr.contains("top_k 4 exceeds gallery size 3"),
        "stderr: {stderr}"
    );

    // `both` is an eval direction, not a retrieval one: usage error.
    let (code, _) = run_err(
        bin()
            .arg("retrieve")
            .arg("--model")
            .arg(&model)
            .arg("--queries")
            .arg(&queries)
            .arg("--gallery")
            .arg(&gallery)
            .arg("--direction")
            .arg("both")
            .arg("--top-k")
            .arg("1"),
    );
    assert_eq!(code, Some(2));
}
