//! `analyze-corrs`: FG-BG percentage per sweep cell and its rank correlation
//! with J&F across cells.
//!
//! For every video the first frame is paired with each later frame; the
//! percentage is averaged over all such pairs in the dataset.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vosprop_core::propagation::affinity_between;
use vosprop_core::tensor_store::{DatasetIndex, VideoManifest};
use vosprop_core::{fg_bg_percentage, read_fmap, spearman_rho, FeatureKey, Similarity};

use crate::propagate::{grid_hard, load_gt};
use crate::sweep::SweepReport;
use crate::{read_json, with_threads, write_json};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAnalysis {
    pub layer: u32,
    pub timestep: u32,
    /// Mean FG-BG fraction over frame pairs, in [0, 1].
    pub fg_bg: f64,
    pub jf: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub similarity: Similarity,
    /// FG-BG cutoff; `None` means H*W of each pair.
    pub k: Option<usize>,
    pub cells: Vec<CellAnalysis>,
    pub spearman_rho: f64,
}

impl Analysis {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,timestep,fg_bg_pct,jf\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6}",
                c.layer,
                c.timestep,
                c.fg_bg * 100.0,
                c.jf * 100.0
            );
        }
        out
    }
}

/// FG-BG fractions of every (first, later) frame pair of one video.
pub fn video_fg_bg(
    manifest: &VideoManifest,
    key: FeatureKey,
    similarity: Similarity,
    k: Option<usize>,
) -> Result<Vec<f64>> {
    let feature = |pos: usize| -> Result<_> {
        let path = manifest
            .feature_path(pos, key)
            .with_context(|| format!("{}: no features for {key}", manifest.video_id))?;
        Ok(read_fmap(&path)?)
    };
    let first = feature(0)?;
    let (h, w) = (first.height(), first.width());
    let first_gt = grid_hard(&load_gt(manifest, 0)?, h, w)?;
    let mut out = Vec::with_capacity(manifest.frames.len().saturating_sub(1));
    for pos in 1..manifest.frames.len() {
        let query = feature(pos)?;
        let query_gt = grid_hard(&load_gt(manifest, pos)?, h, w)?;
        let aff = affinity_between(&[&first], &query, similarity)?;
        let k = k.unwrap_or(aff.cols()).min(aff.surviving());
        out.push(fg_bg_percentage(
            &aff,
            std::slice::from_ref(&first_gt),
            &query_gt,
            k,
        )?);
    }
    Ok(out)
}

/// Reads `<sweep_dir>/sweep.json`, analyzes every ok cell and writes
/// `analysis.json` and `analysis.csv` into `out`.
pub fn analyze_sweep(
    sweep_dir: &Path,
    out: &Path,
    k: Option<usize>,
    threads: usize,
) -> Result<Analysis> {
    let report: SweepReport = read_json(&sweep_dir.join("sweep.json"))?;
    let template = &report.template;
    let k = k.or(template.fg_bg_k);
    if k == Some(0) {
        bail!("k must be >= 1");
    }
    let manifests = DatasetIndex::manifest_paths(&template.manifest)?
        .iter()
        .map(VideoManifest::load)
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(m) = manifests.iter().find(|m| !m.has_all_masks()) {
        bail!("{}: ground truth is required for every frame", m.video_id);
    }
    let ok: Vec<_> = report.ok_cells().collect();
    if ok.len() < 2 {
        bail!(
            "correlation needs at least 2 evaluated cells, found {}",
            ok.len()
        );
    }

    let cells = with_threads(threads, || {
        ok.par_iter()
            .map(|cell| {
                let per_video = manifests
                    .par_iter()
                    .map(|m| video_fg_bg(m, cell.key(), template.affinity, k))
                    .collect::<Result<Vec<_>>>()?;
                let values: Vec<f64> = per_video.into_iter().flatten().collect();
                if values.is_empty() {
                    bail!("{}: no frame pairs", cell.key());
                }
                Ok(CellAnalysis {
                    layer: cell.layer,
                    timestep: cell.timestep,
                    fg_bg: values.iter().sum::<f64>() / values.len() as f64,
                    jf: cell.jf.expect("ok cells carry scores"),
                    pairs: values.len(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let xs: Vec<f64> = cells.iter().map(|c| c.fg_bg).collect();
    let ys: Vec<f64> = cells.iter().map(|c| c.jf).collect();
    let rho = spearman_rho(&xs, &ys).context("FG-BG percentage vs J&F")?;
    let analysis = Analysis {
        similarity: template.affinity,
        k,
        cells,
        spearman_rho: rho,
    };
    std::fs::create_dir_all(out)?;
    write_json(&out.join("analysis.json"), &analysis)?;
    std::fs::write(out.join("analysis.csv"), analysis.to_csv())?;
    Ok(analysis)
}
