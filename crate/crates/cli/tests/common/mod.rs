#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn gwkae(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwkae"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small, fast pipeline on the 3x3 single-region layout.
pub fn small_config(dir: &Path, damages: &str, damaged_reps: u32) -> PathBuf {
    std::fs::copy(fixture("layout_3x3.json"), dir.join("layout.json")).unwrap();
    let cfg = format!(
        r#"{{
  "layout": "layout.json",
  "out_dir": "out",
  "seed": 11,
  "sample_rate": 1000000.0,
  "sim": {{ "n_samples": 400, "repetitions": 10, "damaged_repetitions": {damaged_reps}, "damages": {damages} }},
  "train": {{ "hidden_widths": [16, 8, 4], "epochs": 8, "learning_rate": 0.003, "batch_size": 8 }}
}}"#
    );
    let path = dir.join("config.json");
    std::fs::write(&path, cfg).unwrap();
    path
}

pub fn run_ok(args: &[&str], cwd: &Path) -> Output {
    let out = gwkae(args, cwd);
    assert_eq!(code(&out), 0, "gwkae {args:?} failed:\n{}\n{}", stdout(&out), stderr(&out));
    out
}
