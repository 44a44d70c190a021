use serde::{Deserialize, Serialize};

use crate::correspondence::{
    categorize, extract_correspondences, fg_bg_percentage, removed_categories, CategoryCounts,
    FilterReport,
};
use crate::error::Result;
use crate::propagation::AffinityMatrix;
use crate::scalar::Scalar;
use crate::tensor_store::HardMask;

/// Per frame-pair diagnostics record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostics {
    pub memory_frames: Vec<u32>,
    pub query_frame: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<CategoryCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fg_bg_percentage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removed: Option<CategoryCounts>,
}

/// Builds diagnostics from the raw affinity, the filtered one if any, and
/// feature-resolution ground truth when available. `k` is the FG-BG
/// percentage cutoff; `None` means `H*W`.
pub fn diagnose<T: Scalar>(
    memory_frames: Vec<u32>,
    query_frame: u32,
    raw: &AffinityMatrix<T>,
    filtered: Option<&AffinityMatrix<T>>,
    ground_truth: Option<(&[HardMask], &HardMask)>,
    k: Option<usize>,
) -> Result<PairDiagnostics> {
    let mut out = PairDiagnostics {
        memory_frames,
        query_frame,
        filter: filtered.map(|f| FilterReport::between(raw, f)),
        ..Default::default()
    };
    if let Some((memory, query)) = ground_truth {
        let set = categorize(&extract_correspondences(raw), memory, query)?;
        out.categories = Some(set.counts());
        let k = k.unwrap_or(raw.cols()).min(raw.surviving());
        out.fg_bg_percentage = Some(fg_bg_percentage(raw, memory, query, k)?);
        if let Some(f) = filtered {
            out.removed = Some(removed_categories(raw, f, memory, query)?);
        }
    }
    Ok(out)
}
