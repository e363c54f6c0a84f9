//! Shared fixtures for CLI integration and acceptance tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use voxfilm::patterns::smooth_field;
use voxfilm::{save_image, BitDepth};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voxfilm"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Writes `count` smooth synthetic pattern PNGs of `size` x `size` pixels
/// into `dir`, returning their paths.
pub fn write_patterns(dir: &Path, count: usize, size: usize, seed0: u64) -> Vec<PathBuf> {
    (0..count)
        .map(|i| {
            let img = smooth_field(seed0 + i as u64, size, size, 1.0);
            let path = dir.join(format!("pattern_{i}.png"));
            save_image(&img, &path, BitDepth::Eight).unwrap();
            path
        })
        .collect()
}

/// Manifest JSON for `paths` with the given (rot_x, rot_y) pairs.
pub fn manifest_json(
    paths: &[PathBuf],
    rotations: &[(f64, f64)],
    nx: usize,
    ny: usize,
    out_dir: &Path,
) -> String {
    assert_eq!(paths.len(), rotations.len());
    let patterns: Vec<String> = paths
        .iter()
        .zip(rotations)
        .map(|(p, (rx, ry))| {
            format!(
                r#"{{"path": "{}", "rotation_x_deg": {rx}, "rotation_y_deg": {ry}}}"#,
                p.display()
            )
        })
        .collect();
    format!(
        r#"{{
  "patterns": [{}],
  "grid": {{"nx": {nx}, "ny": {ny}}},
  "output": {{"directory": "{}"}}
}}"#,
        patterns.join(", "),
        out_dir.display()
    )
}

pub fn write_manifest(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

pub fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Parses a report and drops the wall-clock section, the one documented
/// non-deterministic field.
pub fn report_without_timings(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value =
        serde_json::from_slice(&read_bytes(path)).expect("report parses");
    v.as_object_mut().unwrap().remove("timings_ms");
    v
}
