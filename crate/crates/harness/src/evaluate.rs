//! `evaluate`: DAVIS-style scoring of predicted mask trees.
//!
//! Ground truth and predictions are laid out as `<root>/<video>/<frame>.{msk,png}`.
//! The first ground-truth frame of each video is the given annotation and is
//! not scored; every later frame needs a prediction with the same stem.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use rayon::prelude::*;
use vosprop_core::metrics::DEFAULT_BOUNDARY_TOLERANCE;
use vosprop_core::tensor_store::{DatasetIndex, VideoManifest};
use vosprop_core::{evaluate_video, read_mask, EvalResult, HardMask, VideoEval};

use crate::propagate::load_gt;
use crate::synthetic::frame_name;
use crate::{with_threads, write_json};

const MASK_EXTENSIONS: [&str; 2] = ["msk", "png"];

/// Mask files in `dir` keyed by stem; `.msk` wins over `.png` for the same stem.
fn mask_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let Some(rank) = MASK_EXTENSIONS.iter().position(|e| *e == ext) else {
            continue;
        };
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let keep = match out.get(&stem) {
            Some(existing) => {
                let old: &PathBuf = existing;
                let old_rank = MASK_EXTENSIONS
                    .iter()
                    .position(|e| Some(*e) == old.extension().and_then(|e| e.to_str()))
                    .unwrap_or(usize::MAX);
                rank < old_rank
            }
            None => true,
        };
        if keep {
            out.insert(stem, path);
        }
    }
    Ok(out)
}

fn subdirs(dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}

/// Ground truth for one video: the annotated first frame's object count and
/// the frames to score, as (stem, mask) in order.
struct VideoTruth {
    video: String,
    objs: u8,
    frames: Vec<(String, HardMask)>,
    first_stem: String,
}

fn score(truth: &VideoTruth, pred_dir: &Path, tolerance: f64) -> Result<VideoEval, String> {
    let dir = pred_dir.join(&truth.video);
    let preds = mask_files(&dir).map_err(|e| format!("{}: {e}", truth.video))?;
    let mut missing = Vec::new();
    let mut pred_masks = Vec::with_capacity(truth.frames.len());
    for (stem, _) in &truth.frames {
        match preds.get(stem) {
            Some(path) => match read_mask(path) {
                Ok(m) => pred_masks.push(m),
                Err(e) => return Err(format!("{}: {e}", truth.video)),
            },
            None => missing.push(stem.clone()),
        }
    }
    let expected: std::collections::BTreeSet<&str> =
        truth.frames.iter().map(|(s, _)| s.as_str()).collect();
    // A prediction for the annotated frame is harmless.
    let extra: Vec<&String> = preds
        .keys()
        .filter(|s| !expected.contains(s.as_str()) && truth.first_stem != **s)
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = format!("{}:", truth.video);
        if !missing.is_empty() {
            let _ = write!(msg, " missing frames [{}]", missing.join(", "));
        }
        if !extra.is_empty() {
            let names: Vec<&str> = extra.iter().map(|s| s.as_str()).collect();
            let _ = write!(msg, " extra frames [{}]", names.join(", "));
        }
        return Err(msg);
    }
    let gts: Vec<HardMask> = truth.frames.iter().map(|(_, m)| m.clone()).collect();
    evaluate_video(&truth.video, &pred_masks, &gts, truth.objs, tolerance)
        .map_err(|e| format!("{}: {e}", truth.video))
}

fn evaluate_truths(truths: Vec<VideoTruth>, pred_dir: &Path, tolerance: f64) -> Result<EvalResult> {
    if truths.is_empty() {
        bail!("no ground-truth videos found");
    }
    let results: Vec<Result<VideoEval, String>> = truths
        .par_iter()
        .map(|t| score(t, pred_dir, tolerance))
        .collect();
    let mut problems = Vec::new();
    let mut videos = Vec::new();
    for r in results {
        match r {
            Ok(v) => videos.push(v),
            Err(e) => problems.push(e),
        }
    }
    if !problems.is_empty() {
        bail!(
            "evaluation failed for {} video(s):\n  {}",
            problems.len(),
            problems.join("\n  ")
        );
    }
    Ok(EvalResult::from_videos(videos))
}

fn truth_from_dir(gt_root: &Path, video: &str) -> Result<VideoTruth> {
    let files = mask_files(&gt_root.join(video))?;
    let mut iter = files.into_iter();
    let Some((first_stem, first_path)) = iter.next() else {
        bail!("{video}: no ground-truth frames");
    };
    let first = read_mask(&first_path)?;
    let frames = iter
        .map(|(stem, path)| Ok((stem, read_mask(&path)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoTruth {
        video: video.to_string(),
        objs: first.objs().max(first.max_label()),
        frames,
        first_stem,
    })
}

fn truth_from_manifest(manifest: &VideoManifest) -> Result<VideoTruth> {
    if !manifest.has_all_masks() {
        bail!(
            "{}: manifest lacks ground truth for some frames",
            manifest.video_id
        );
    }
    let first = load_gt(manifest, 0)?;
    let frames = (1..manifest.frames.len())
        .map(|pos| {
            Ok((
                frame_name(manifest.frames[pos].index),
                load_gt(manifest, pos)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoTruth {
        video: manifest.video_id.clone(),
        objs: first.objs(),
        frames,
        first_stem: frame_name(manifest.frames[0].index),
    })
}

/// Scores `pred_dir` against a ground-truth tree.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, threads: usize) -> Result<EvalResult> {
    if !gt_dir.is_dir() {
        bail!("ground-truth directory {} does not exist", gt_dir.display());
    }
    with_threads(threads, || {
        let truths = subdirs(gt_dir)?
            .par_iter()
            .map(|v| truth_from_dir(gt_dir, v))
            .collect::<Result<Vec<_>>>()?;
        evaluate_truths(truths, pred_dir, DEFAULT_BOUNDARY_TOLERANCE)
    })?
}

/// Scores `pred_dir` against the ground truth referenced by a manifest or dataset index.
pub fn evaluate_manifest(pred_dir: &Path, manifest: &Path, threads: usize) -> Result<EvalResult> {
    let paths = DatasetIndex::manifest_paths(manifest)?;
    with_threads(threads, || {
        let truths = paths
            .par_iter()
            .map(|p| truth_from_manifest(&VideoManifest::load(p)?))
            .collect::<Result<Vec<_>>>()?;
        evaluate_truths(truths, pred_dir, DEFAULT_BOUNDARY_TOLERANCE)
    })?
}

/// Writes `eval.json` and `eval.txt` into `dir`.
pub fn write_report(result: &EvalResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("eval.json"), result)?;
    std::fs::write(dir.join("eval.txt"), result.to_table())?;
    Ok(())
}
