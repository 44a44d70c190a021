//! `propagate`: segments every video of a manifest and writes masks,
//! per-frame diagnostics and a run record.
//!
//! ```text
//! <out>/run.json
//! <out>/<video>/<frame:05>.msk
//! <out>/<video>/<frame:05>.png
//! <out>/<video>/diagnostics.json
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vosprop_core::propagation::step;
use vosprop_core::tensor_store::{
    upsample_to_hard, write_msk, write_png_mask, DatasetIndex, VideoManifest,
};
use vosprop_core::{
    categorize, extract_correspondences, read_fmap, read_mask, resample_mask, CategoryCounts,
    CorrespondenceFilter, FilterReport, HardMask, LabelMask, MagUnits, MemoryBank,
    ResampleDirection, SoftMask,
};

use crate::config::{FilterKind, RadiusUnits, RunConfig};
use crate::synthetic::frame_name;
use crate::{with_threads, write_json};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoStatus {
    pub video: String,
    pub status: Status,
    /// Predicted frames written.
    pub frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall time; reported on the console only so artifacts stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

/// Contents of `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub config: RunConfig,
    pub videos: Vec<VideoStatus>,
}

impl RunRecord {
    pub fn failures(&self) -> impl Iterator<Item = &VideoStatus> {
        self.videos.iter().filter(|v| v.status == Status::Failed)
    }

    pub fn all_ok(&self) -> bool {
        self.failures().next().is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub frame: u32,
    pub memory_frames: Vec<u32>,
    pub effective_topk: usize,
    pub topk_clamped: bool,
    /// Query pixels left without candidates after filtering.
    pub unmatched: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
    /// Argmax correspondence categories on the unfiltered affinity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<CategoryCounts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoDiagnostics {
    pub video: String,
    pub frames: Vec<FrameDiagnostics>,
}

/// Area-pools a ground-truth mask onto the feature grid.
pub fn grid_soft(mask: &HardMask, h: usize, w: usize) -> Result<SoftMask<f32>> {
    Ok(resample_mask::<f32>(
        &LabelMask::Hard(mask.clone()),
        h,
        w,
        ResampleDirection::Down,
    )?
    .to_soft())
}

pub fn grid_hard(mask: &HardMask, h: usize, w: usize) -> Result<HardMask> {
    Ok(vosprop_core::harden(&grid_soft(mask, h, w)?))
}

/// Reads a ground-truth mask and re-declares it with the manifest's object count.
pub fn load_gt(manifest: &VideoManifest, pos: usize) -> Result<HardMask> {
    let path = manifest
        .mask_path(pos)
        .ok_or_else(|| anyhow!("frame {} has no mask", manifest.frames[pos].index))?;
    let mask = read_mask(&path)?;
    if mask.height() != manifest.image_height || mask.width() != manifest.image_width {
        bail!(
            "{}: mask is {}x{}, manifest says {}x{}",
            path.display(),
            mask.height(),
            mask.width(),
            manifest.image_height,
            manifest.image_width
        );
    }
    let objs = manifest.objects.max(mask.max_label());
    Ok(HardMask::new(
        mask.height(),
        mask.width(),
        objs,
        mask.labels().to_vec(),
    )?)
}

fn video_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Lazily loaded feature-grid ground truth, indexed by frame position.
struct GridTruth<'a> {
    manifest: &'a VideoManifest,
    h: usize,
    w: usize,
    masks: Vec<Option<HardMask>>,
}

impl<'a> GridTruth<'a> {
    fn new(manifest: &'a VideoManifest, h: usize, w: usize) -> Self {
        Self {
            manifest,
            h,
            w,
            masks: vec![None; manifest.frames.len()],
        }
    }

    fn get(&mut self, pos: usize) -> Result<&HardMask> {
        if self.masks[pos].is_none() {
            let full = load_gt(self.manifest, pos)?;
            self.masks[pos] = Some(grid_hard(&full, self.h, self.w)?);
        }
        Ok(self.masks[pos].as_ref().expect("just loaded"))
    }
}

fn run_video(cfg: &RunConfig, manifest: &VideoManifest, dir: &Path) -> Result<usize> {
    let key = cfg.key();
    if !manifest.has_key(key) {
        bail!("no features for {key}");
    }
    let features = |pos: usize| -> Result<_> {
        let path = manifest.feature_path(pos, key).expect("key checked");
        read_fmap(&path).with_context(|| format!("frame {}", manifest.frames[pos].index))
    };
    let affinity = cfg.affinity_config();
    let first = features(0)?;
    let (gh, gw) = (first.height(), first.width());
    let (ih, iw) = (manifest.image_height, manifest.image_width);
    let gt0 = load_gt(manifest, 0).context("first-frame annotation")?;

    let mut bank = MemoryBank::new(cfg.memory_n, cfg.pin_first)?;
    let first_index = manifest.frames[0].index;
    bank.init(first_index, first, grid_soft(&gt0, gh, gw)?)?;

    let has_gt = manifest.has_all_masks();
    if cfg.filter == FilterKind::Oracle && !has_gt {
        bail!("the oracle filter needs ground truth for every frame");
    }
    let mut truth = GridTruth::new(manifest, gh, gw);
    let mag_units = match cfg.mag_units {
        RadiusUnits::Grid => MagUnits::FeatureGrid,
        RadiusUnits::Image => MagUnits::ImagePixels {
            stride: ih as f64 / gh as f64,
        },
    };

    let mut diagnostics = Vec::with_capacity(manifest.frames.len() - 1);
    for pos in 1..manifest.frames.len() {
        let index = manifest.frames[pos].index;
        let query = features(pos)?;
        let memory_frames = bank.frame_indices();
        let slot_positions: Vec<usize> = memory_frames
            .iter()
            .map(|&f| (f - first_index) as usize)
            .collect();
        let filter = match cfg.filter {
            FilterKind::None => CorrespondenceFilter::None,
            FilterKind::Mag => CorrespondenceFilter::Mag {
                radius: cfg.mag_radius,
                units: mag_units,
            },
            FilterKind::Oracle => CorrespondenceFilter::Oracle {
                memory_gt: slot_positions
                    .iter()
                    .map(|&p| truth.get(p).cloned())
                    .collect::<Result<_>>()?,
                query_gt: truth.get(pos)?.clone(),
            },
        };
        let out = step(&mut bank, index, query, &affinity, Some(&filter))
            .with_context(|| format!("frame {index}"))?;

        let categories = if has_gt {
            let memory_gt: Vec<HardMask> = slot_positions
                .iter()
                .map(|&p| truth.get(p).cloned())
                .collect::<Result<_>>()?;
            let query_gt = truth.get(pos)?.clone();
            let set = categorize(
                &extract_correspondences(&out.affinity),
                &memory_gt,
                &query_gt,
            )?;
            Some(set.counts())
        } else {
            None
        };

        let mask = upsample_to_hard(&out.mask, ih, iw)?;
        let name = frame_name(index);
        write_msk(&mask, dir.join(format!("{name}.msk")))?;
        write_png_mask(&mask, dir.join(format!("{name}.png")))?;
        diagnostics.push(FrameDiagnostics {
            frame: index,
            memory_frames,
            effective_topk: out.effective_topk,
            topk_clamped: out.topk_clamped,
            unmatched: out.unmatched,
            filter: out.filter,
            categories,
        });
    }
    let written = diagnostics.len();
    write_json(
        &dir.join("diagnostics.json"),
        &VideoDiagnostics {
            video: manifest.video_id.clone(),
            frames: diagnostics,
        },
    )?;
    Ok(written)
}

fn process(cfg: &RunConfig, manifest_path: &Path) -> VideoStatus {
    let started = Instant::now();
    let (video, result) = match VideoManifest::load(manifest_path) {
        Ok(m) => {
            let dir = cfg.out.join(&m.video_id);
            let result = prepare_dir(&dir).and_then(|_| run_video(cfg, &m, &dir));
            (m.video_id, result)
        }
        Err(e) => (video_name(manifest_path), Err(e.into())),
    };
    let status = match result {
        Ok(frames) => VideoStatus {
            video,
            status: Status::Ok,
            frames,
            error: None,
            seconds: 0.0,
        },
        Err(e) => VideoStatus {
            video,
            status: Status::Failed,
            frames: 0,
            error: Some(format!("{e:#}")),
            seconds: 0.0,
        },
    };
    VideoStatus {
        seconds: started.elapsed().as_secs_f64(),
        ..status
    }
}

fn prepare_dir(dir: &PathBuf) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Propagates every video listed by `cfg.manifest` and writes `run.json`.
/// Per-video failures are recorded rather than returned; only problems with
/// the dataset index or the output directory are errors.
pub fn run_propagation(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let manifests = DatasetIndex::manifest_paths(&cfg.manifest)?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let videos = with_threads(cfg.threads, || {
        manifests
            .par_iter()
            .map(|m| process(cfg, m))
            .collect::<Vec<_>>()
    })?;
    let record = RunRecord {
        config_hash: cfg.config_hash(),
        config: cfg.clone(),
        videos,
    };
    write_json(&cfg.out.join("run.json"), &record)?;
    Ok(record)
}
