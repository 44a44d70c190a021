//! Batch driver for `vosprop-core`: propagation over whole datasets,
//! DAVIS-style evaluation, layer × timestep sweeps, correspondence analysis
//! and a synthetic dataset generator.
//!
//! Every command writes deterministic artifacts: results are collected in
//! manifest order regardless of the worker count, and nothing time-dependent
//! is written to disk.

pub mod analyze;
pub mod config;
pub mod evaluate;
pub mod propagate;
pub mod sweep;
pub mod synthetic;

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub use config::{FilterKind, RadiusUnits, RunConfig, RunOverrides, DEFAULT_MAG_RADIUS};

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Runs `f` on a rayon pool with `threads` workers (0 = rayon's default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    Ok(pool.install(f))
}
