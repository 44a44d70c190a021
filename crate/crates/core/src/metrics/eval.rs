use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{boundary_f, jaccard};
use crate::tensor_store::HardMask;

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectEval {
    pub object: u8,
    pub j_per_frame: Vec<f64>,
    pub f_per_frame: Vec<f64>,
    pub j: f64,
    pub f: f64,
}

/// Scores for one video; all values are fractions in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoEval {
    pub video: String,
    pub objects: Vec<ObjectEval>,
    pub j: f64,
    pub f: f64,
    pub jf: f64,
}

/// Scores predictions for frames 2..K against ground truth, for objects
/// `1..=objs`. Frame 1 is the given annotation and must not be included.
pub fn evaluate_video(
    video: &str,
    preds: &[HardMask],
    gts: &[HardMask],
    objs: u8,
    tolerance: f64,
) -> Result<VideoEval> {
    if preds.len() != gts.len() {
        return Err(Error::Dimension(format!(
            "{video}: {} predictions for {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    let mut objects = Vec::with_capacity(objs as usize);
    for obj in 1..=objs {
        let mut j_per_frame = Vec::with_capacity(preds.len());
        let mut f_per_frame = Vec::with_capacity(preds.len());
        for (p, g) in preds.iter().zip(gts) {
            j_per_frame.push(jaccard(p, g, obj)?);
            f_per_frame.push(boundary_f(p, g, obj, tolerance)?);
        }
        objects.push(ObjectEval {
            object: obj,
            j: mean(j_per_frame.iter().copied()),
            f: mean(f_per_frame.iter().copied()),
            j_per_frame,
            f_per_frame,
        });
    }
    let j = mean(objects.iter().map(|o| o.j));
    let f = mean(objects.iter().map(|o| o.f));
    Ok(VideoEval {
        video: video.to_string(),
        objects,
        j,
        f,
        jf: (j + f) / 2.0,
    })
}

/// Dataset-level scores. `j`/`f`/`jf` average over every (video, object)
/// pair; the `video_*` fields average per-video scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub videos: Vec<VideoEval>,
    pub j: f64,
    pub f: f64,
    pub jf: f64,
    pub video_j: f64,
    pub video_f: f64,
    pub video_jf: f64,
}

impl EvalResult {
    pub fn from_videos(videos: Vec<VideoEval>) -> Self {
        let j = mean(videos.iter().flat_map(|v| v.objects.iter().map(|o| o.j)));
        let f = mean(videos.iter().flat_map(|v| v.objects.iter().map(|o| o.f)));
        let video_j = mean(videos.iter().map(|v| v.j));
        let video_f = mean(videos.iter().map(|v| v.f));
        Self {
            j,
            f,
            jf: (j + f) / 2.0,
            video_j,
            video_f,
            video_jf: (video_j + video_f) / 2.0,
            videos,
        }
    }

    pub fn jf_percent(&self) -> f64 {
        self.jf * 100.0
    }

    /// Aligned plain-text report, scores ×100.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>10} {:>8} {:>8}", "J&F-Mean", "J-Mean", "F-Mean");
        let _ = writeln!(
            out,
            "{:>10.1} {:>8.1} {:>8.1}",
            self.jf * 100.0,
            self.j * 100.0,
            self.f * 100.0
        );
        let _ = writeln!(out);
        let width = self
            .videos
            .iter()
            .map(|v| v.video.len())
            .max()
            .unwrap_or(0)
            .max("Sequence".len());
        let _ = writeln!(
            out,
            "{:<width$} {:>8} {:>8} {:>8}",
            "Sequence", "J&F", "J", "F"
        );
        for v in &self.videos {
            let _ = writeln!(
                out,
                "{:<width$} {:>8.1} {:>8.1} {:>8.1}",
                v.video,
                v.jf * 100.0,
                v.j * 100.0,
                v.f * 100.0
            );
        }
        out
    }
}
