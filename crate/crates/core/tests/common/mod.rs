#![allow(dead_code)]

use lsr_core::config::RunConfig;
use lsr_core::decision::{train_lsr, LsrModel, TrainReport};
use lsr_core::imaging::{read_luma, YImage};
use std::path::{Path, PathBuf};

pub fn corpus_dir(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus").join(sub)
}

/// Training tiles sorted by file name.
pub fn train_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir("train"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    files.sort();
    files
}

pub fn heldout_files() -> Vec<PathBuf> {
    ["chelsea.png", "coffee.png", "motorcycle.png"].iter().map(|n| corpus_dir("heldout").join(n)).collect()
}

pub fn load_all(paths: &[PathBuf]) -> Vec<YImage> {
    paths.iter().map(|p| read_luma(p).unwrap()).collect()
}

/// Small but structurally complete V1 settings: both branches, k-means, fusion.
pub fn tiny_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("easy_features", "24"),
        ("hard_features", "48"),
        ("easy_trees", "6"),
        ("hard_trees", "6"),
        ("max_depth", "4"),
        ("clusters", "3"),
        ("stride", "3"),
        ("max_samples_per_branch", "4000"),
        ("fit_patches", "3000"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg.seed = seed;
    cfg
}

pub fn tiny_images() -> Vec<YImage> {
    let files = train_files();
    load_all(&[files[2].clone(), files[1].clone(), files[13].clone()])
}

pub fn tiny_model(seed: u64) -> (LsrModel, TrainReport) {
    train_lsr(&tiny_images(), &tiny_config(seed)).unwrap()
}
