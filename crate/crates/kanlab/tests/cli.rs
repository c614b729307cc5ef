//! End-to-end tests of the command-line binary: exit codes, artifact
//! layout, override plumbing, and byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn kanlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kanlab"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn invalid_values_exit_2_and_name_the_dotted_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{}");

    let out = kanlab(&["train", "--config", &cfg, "train.epochs=-1"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("train.epochs"),
        "offending path not named: {}",
        stderr_of(&out)
    );

    let out = kanlab(&["train", "--config", &cfg, "train.epocs=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("epocs"));

    let out = kanlab(&["experiment", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("preset"));

    let out = kanlab(&["experiment", "--preset", "exp_edge", "--scale", "huge"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("desk|paper"));
}

#[test]
fn missing_files_exit_3() {
    let out = kanlab(&["data", "verify", "/nonexistent/cifar"]);
    assert_eq!(out.status.code(), Some(3));

    let out = kanlab(&["train", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(3));

    let out = kanlab(&["eval", "--checkpoint", "/nonexistent/model.ckpt"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gradcheck_runs_and_rejects_unknown_tags() {
    let out = kanlab(&["gradcheck", "--model", "edge_kan"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["arch"], "edge_kan");

    let out = kanlab(&["gradcheck", "--model", "resnet50"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_then_eval_round_trips_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{
  "model": {{"arch": "cnn_kan", "channels": [4, 8], "grid_size": 3}},
  "train": {{"epochs": 2, "seed": 3}},
  "data": {{"synth_train": 120, "synth_test": 60}},
  "output": {{"dir": "{}"}}
}}"#,
            out_dir.display()
        ),
    );

    let out = kanlab(&["train", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let line: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let trained_acc = line["test"]["metric"].as_f64().unwrap();

    for artifact in ["checkpoint.ckpt", "checkpoint.ckpt.json", "train.csv", "metadata.json"] {
        assert!(out_dir.join(artifact).is_file(), "{artifact} missing");
    }
    // The metadata embeds the fully resolved config and a fingerprint.
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["config"]["train"]["epochs"], 2);
    assert_eq!(meta["fingerprint"].as_str().unwrap().len(), 64);
    assert_eq!(meta["noise_applied_to"], "train_split_only");

    let ckpt = out_dir.join("checkpoint.ckpt");
    let out = kanlab(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "data.synth_train=120",
        "data.synth_test=60",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let eval: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(eval["accuracy"].as_f64().unwrap(), trained_acc);
    assert_eq!(eval["records"], 60);
}

#[test]
fn condition_grid_covers_every_cell_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("exp3");
    let out = kanlab(&[
        "experiment",
        "--preset",
        "exp3",
        "--seeds",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
        "train.epochs=0",
        "data.synth_train=200",
        "data.synth_test=40",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "preset,cell,model,sweep_value,seed,epoch,split,loss,accuracy,wall_ms"
    );
    // 2 conditions x 4 penalty strengths x 3 models x 1 seed x 1 eval
    // epoch (epochs=0) x 2 splits.
    assert_eq!(lines.len() - 1, 48);
    for cond in ["noise30", "data60"] {
        for lam in ["0", "0.0001", "0.001", "0.01"] {
            for model in ["cnn_mlp", "ckan_cnn_mlp", "cnn_kan"] {
                let cell = format!("{cond}/l1_{lam}/{model}");
                assert!(
                    lines.iter().any(|l| l.contains(&cell)),
                    "cell {cell} missing from CSV"
                );
            }
        }
    }

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["exp3/noise30"].is_object());
    assert!(summary["exp3/data60"].is_object());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["preset"], "exp3");
    assert_eq!(meta["scale"], "desk");
}

#[test]
fn identical_invocations_produce_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let run_into = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = kanlab(&[
            "experiment",
            "--preset",
            "exp_edge",
            "--seeds",
            "1,2",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
        (
            std::fs::read(out_dir.join("results.csv")).unwrap(),
            std::fs::read(out_dir.join("summary.json")).unwrap(),
            std::fs::read(out_dir.join("metadata.json")).unwrap(),
        )
    };
    let a = run_into("a");
    let b = run_into("b");
    assert_eq!(a.0, b.0, "results.csv differs");
    assert_eq!(a.1, b.1, "summary.json differs");
    // The fingerprint ignores the output location, so it matches across
    // directories; re-running into the same directory reproduces the whole
    // metadata file.
    let fp = |bytes: &[u8]| {
        serde_json::from_slice::<serde_json::Value>(bytes).unwrap()["fingerprint"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert_eq!(fp(&a.2), fp(&b.2), "fingerprints differ");
    let a2 = run_into("a");
    assert_eq!(a.2, a2.2, "metadata.json differs on same-directory re-run");
    // Deterministic output zeroes the wall-clock column.
    let csv = String::from_utf8(a.0).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn verify_walks_a_complete_fixture_directory() {
    let dir = tempfile::tempdir().unwrap();
    // Two records per file, labels 0 and 1, all pixels constant.
    let record = |label: u8| {
        let mut v = vec![label];
        v.extend(std::iter::repeat(7u8).take(3072));
        v
    };
    let mut file = Vec::new();
    file.extend(record(0));
    file.extend(record(1));
    for name in [
        "data_batch_1.bin",
        "data_batch_2.bin",
        "data_batch_3.bin",
        "data_batch_4.bin",
        "data_batch_5.bin",
        "test_batch.bin",
    ] {
        std::fs::write(dir.path().join(name), &file).unwrap();
    }

    let out = kanlab(&["data", "verify", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["total"], 12);
    assert_eq!(report["per_class"][0], 6);
    assert_eq!(report["per_class"][1], 6);
    assert_eq!(report["per_class"][2], 0);
    assert_eq!(report["files"].as_array().unwrap().len(), 6);

    // Truncate one file: the same invocation now fails with the IO code.
    std::fs::write(dir.path().join("data_batch_3.bin"), &file[..3000]).unwrap();
    let out = kanlab(&["data", "verify", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
