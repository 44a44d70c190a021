#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vosprop_harness::synthetic::{generate, CellSpec, SyntheticSpec};

pub fn vosprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vosprop"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        videos: 2,
        frames: 5,
        objects: 2,
        height: 12,
        width: 16,
        channels: 8,
        seed,
        ..Default::default()
    }
}

pub fn cell(layer: u32, timestep: u32, noise: f64, separation: f64) -> CellSpec {
    CellSpec {
        layer,
        timestep,
        noise,
        separation,
    }
}

pub fn dataset(root: &Path, spec: &SyntheticSpec) -> PathBuf {
    generate(spec, root).expect("synthetic dataset")
}

/// Every file under `root` by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
