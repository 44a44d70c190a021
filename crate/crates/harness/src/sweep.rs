//! `sweep`: one propagate + evaluate per (layer, timestep) cell.
//!
//! ```text
//! <out>/sweep.json
//! <out>/sweep.csv                     layer,timestep,status,j,f,jf (percent)
//! <out>/cells/L<l>_T<t>/run.json     plus the cell's masks and eval.json
//! ```
//!
//! A cell whose `run.json` carries the same config hash and whose videos all
//! succeeded is not recomputed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use vosprop_core::tensor_store::{DatasetIndex, VideoManifest};
use vosprop_core::{EvalResult, FeatureKey};

use crate::config::RunConfig;
use crate::evaluate::{evaluate_manifest, write_report};
use crate::propagate::{run_propagation, RunRecord};
use crate::{read_json, write_json};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub layers: Vec<u32>,
    pub timesteps: Vec<u32>,
    /// Layer and timestep are overwritten per cell; `out` is the sweep root.
    pub template: RunConfig,
}

impl SweepSpec {
    /// Cells in layer-major order.
    pub fn cells(&self) -> Vec<FeatureKey> {
        self.layers
            .iter()
            .flat_map(|&layer| {
                self.timesteps
                    .iter()
                    .map(move |&timestep| FeatureKey { layer, timestep })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    /// Some video has no features for this cell.
    Absent,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub layer: u32,
    pub timestep: u32,
    pub status: CellStatus,
    /// Fractions in [0, 1]; present for ok cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellResult {
    pub fn key(&self) -> FeatureKey {
        FeatureKey {
            layer: self.layer,
            timestep: self.timestep,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub layers: Vec<u32>,
    pub timesteps: Vec<u32>,
    pub template: RunConfig,
    pub cells: Vec<CellResult>,
    /// Highest-J&F ok cell; earlier cells win ties.
    pub best: Option<FeatureKey>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,timestep,status,j,f,jf\n");
        let pct = |v: Option<f64>| v.map(|v| format!("{:.6}", v * 100.0)).unwrap_or_default();
        for c in &self.cells {
            let status = serde_json::to_value(c.status).unwrap();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.layer,
                c.timestep,
                status.as_str().unwrap(),
                pct(c.j),
                pct(c.f),
                pct(c.jf)
            );
        }
        out
    }

    pub fn ok_cells(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.status == CellStatus::Ok)
    }
}

pub fn cell_dir(root: &Path, key: FeatureKey) -> PathBuf {
    root.join("cells").join(key.to_string())
}

fn cached(cfg: &RunConfig, dir: &Path) -> Option<EvalResult> {
    let record: RunRecord = read_json(&dir.join("run.json")).ok()?;
    if record.config_hash != cfg.config_hash() || !record.all_ok() {
        return None;
    }
    read_json(&dir.join("eval.json")).ok()
}

fn run_cell(cfg: &RunConfig, dir: &Path) -> Result<(EvalResult, bool)> {
    if let Some(result) = cached(cfg, dir) {
        return Ok((result, true));
    }
    let record = run_propagation(cfg)?;
    let failures: Vec<String> = record
        .failures()
        .map(|v| format!("{}: {}", v.video, v.error.as_deref().unwrap_or("failed")))
        .collect();
    if !failures.is_empty() {
        bail!("{}", failures.join("; "));
    }
    let result = evaluate_manifest(dir, &cfg.manifest, cfg.threads)?;
    write_report(&result, dir)?;
    Ok((result, false))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    if spec.layers.is_empty() || spec.timesteps.is_empty() {
        bail!("sweep axes must be non-empty");
    }
    let root = spec.template.out.clone();
    std::fs::create_dir_all(&root)?;
    let manifests = DatasetIndex::manifest_paths(&spec.template.manifest)?
        .iter()
        .map(VideoManifest::load)
        .collect::<Result<Vec<_>, _>>()?;

    let mut cells = Vec::new();
    for key in spec.cells() {
        let mut cell = CellResult {
            layer: key.layer,
            timestep: key.timestep,
            status: CellStatus::Ok,
            j: None,
            f: None,
            jf: None,
            error: None,
        };
        if let Some(m) = manifests.iter().find(|m| !m.has_key(key)) {
            cell.status = CellStatus::Absent;
            cell.error = Some(format!("{}: no features for {key}", m.video_id));
            cells.push(cell);
            continue;
        }
        let cfg = RunConfig {
            layer: key.layer,
            timestep: key.timestep,
            out: cell_dir(&root, key),
            ..spec.template.clone()
        };
        match run_cell(&cfg, &cfg.out) {
            Ok((result, was_cached)) => {
                cell.j = Some(result.j);
                cell.f = Some(result.f);
                cell.jf = Some(result.jf);
                if was_cached {
                    eprintln!("{key}: reused cached results");
                }
            }
            Err(e) => {
                cell.status = CellStatus::Failed;
                cell.error = Some(format!("{e:#}"));
            }
        }
        cells.push(cell);
    }

    let mut best: Option<&CellResult> = None;
    for c in cells.iter().filter(|c| c.status == CellStatus::Ok) {
        if best.is_none_or(|b| c.jf > b.jf) {
            best = Some(c);
        }
    }
    let report = SweepReport {
        layers: spec.layers.clone(),
        timesteps: spec.timesteps.clone(),
        template: spec.template.clone(),
        best: best.map(CellResult::key),
        cells,
    };
    write_json(&root.join("sweep.json"), &report)?;
    std::fs::write(root.join("sweep.csv"), report.to_csv())?;
    Ok(report)
}
