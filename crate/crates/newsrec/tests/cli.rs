//! The command-line surface, exercised through the built binary.

use std::path::PathBuf;
use std::process::Command;

fn newsrec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_newsrec"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("newsrec-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_micro_config(dir: &PathBuf, data: &PathBuf, out: &PathBuf) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        format!(
            r#"
model = "nrms"
fusion = "late"
objective = "ce"
epochs = 1
learning_rate = 0.001
seeds = [1]
batch_size = 32
data_dir = "{}"
out_dir = "{}"

[model_config]
title_len = 8
word_dim = 10
heads = 2
head_dim = 5
query_dim = 6
"#,
            data.display(),
            out.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn train_evaluate_report_round_trip() {
    let dir = workdir("roundtrip");
    let data = dir.join("data");
    let out = dir.join("out");

    let status = newsrec()
        .args(["gen-data", "--out"])
        .arg(&data)
        .args(["--train-impressions", "150", "--dev-impressions", "40", "--users", "40"])
        .status()
        .unwrap();
    assert!(status.success());

    let config = write_micro_config(&dir, &data, &out);

    let output = newsrec()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "train failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out.join("nrms_late_ce_seed1.ckpt").exists());
    assert!(out.join("manifest.txt").exists());

    let output = newsrec()
        .arg("evaluate")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "evaluate failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("AUC"), "summary missing: {stdout}");
    assert!(out.join("report_nrms_late_ce.tsv").exists());

    let output = newsrec().arg("report").arg("--out").arg(&out).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("auc_mean"));
    assert!(stdout.contains("nrms\tlate\tce"));
    assert!(out.join("report.tsv").exists());
}

#[test]
fn cli_flags_override_config_fields() {
    let dir = workdir("flags");
    let data = dir.join("data");
    let out = dir.join("out");
    assert!(newsrec()
        .args(["gen-data", "--out"])
        .arg(&data)
        .args(["--train-impressions", "120", "--dev-impressions", "30", "--users", "30"])
        .status()
        .unwrap()
        .success());
    let config = write_micro_config(&dir, &data, &out);

    // Same config, overridden objective/tau/seed via flags.
    let output = newsrec()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .args(["--objective", "scl", "--tau", "0.12", "--seed", "9", "--epochs", "1"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "train failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out.join("nrms_late_scl_seed9.ckpt").exists());
}

#[test]
fn unknown_model_is_rejected() {
    let output = newsrec()
        .args(["train", "--model", "transformerxl"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("unknown model variant") || stderr.contains("invalid value"));
}
