use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::{check_masks, Category, CategoryCounts, Displacement};
use crate::error::{Error, Result};
use crate::propagation::AffinityMatrix;
use crate::scalar::Scalar;
use crate::tensor_store::HardMask;

/// Coordinate space in which a MAG radius is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "units")]
pub enum MagUnits {
    FeatureGrid,
    /// Radius in image pixels; grid displacements are multiplied by `stride`.
    ImagePixels {
        stride: f64,
    },
}

impl MagUnits {
    fn scale(self) -> f64 {
        match self {
            MagUnits::FeatureGrid => 1.0,
            MagUnits::ImagePixels { stride } => stride,
        }
    }
}

/// Correspondence filter applied to an affinity matrix before propagation.
#[derive(Clone, Debug, PartialEq)]
pub enum CorrespondenceFilter {
    None,
    Mag {
        radius: f64,
        units: MagUnits,
    },
    /// Evaluation-only: ground truth at feature resolution for every memory
    /// slot (in bank order) and for the query frame.
    Oracle {
        memory_gt: Vec<HardMask>,
        query_gt: HardMask,
    },
}

impl CorrespondenceFilter {
    /// MAG filter at `radius` feature-grid cells.
    pub fn mag(radius: f64) -> Self {
        CorrespondenceFilter::Mag {
            radius,
            units: MagUnits::FeatureGrid,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, CorrespondenceFilter::None)
    }

    pub fn apply<T: Scalar>(&self, affinity: &AffinityMatrix<T>) -> Result<AffinityMatrix<T>> {
        match self {
            CorrespondenceFilter::None => Ok(affinity.clone()),
            CorrespondenceFilter::Mag { radius, units } => {
                if radius.is_nan() || *radius <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "MAG radius must be positive, got {radius}"
                    )));
                }
                Ok(mag_filter_scaled(affinity, *radius, units.scale()))
            }
            CorrespondenceFilter::Oracle {
                memory_gt,
                query_gt,
            } => oracle_filter(affinity, memory_gt, query_gt),
        }
    }
}

/// Entry counts before and after filtering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: usize,
    pub kept: usize,
    pub removed: usize,
}

impl FilterReport {
    pub fn between<T: Scalar>(raw: &AffinityMatrix<T>, filtered: &AffinityMatrix<T>) -> Self {
        let total = raw.surviving();
        let kept = filtered.surviving();
        Self {
            total,
            kept,
            removed: total.saturating_sub(kept),
        }
    }
}

fn exclude_where<T: Scalar>(
    affinity: &AffinityMatrix<T>,
    drop: impl Fn(usize, usize) -> bool + Sync,
) -> AffinityMatrix<T> {
    let rows = affinity.rows();
    let mut out = affinity.clone();
    out.scores_mut()
        .par_chunks_mut(rows)
        .enumerate()
        .for_each(|(col, column)| {
            for (row, v) in column.iter_mut().enumerate() {
                if drop(row, col) {
                    *v = T::neg_infinity();
                }
            }
        });
    out
}

/// Excludes every entry whose memory-to-query displacement exceeds `radius`
/// feature-grid cells. Entries exactly at the radius are kept.
pub fn mag_filter<T: Scalar>(affinity: &AffinityMatrix<T>, radius: f64) -> AffinityMatrix<T> {
    mag_filter_scaled(affinity, radius, 1.0)
}

/// As [`mag_filter`], with displacements multiplied by `scale` before the comparison.
pub fn mag_filter_scaled<T: Scalar>(
    affinity: &AffinityMatrix<T>,
    radius: f64,
    scale: f64,
) -> AffinityMatrix<T> {
    if radius == f64::INFINITY {
        return affinity.clone();
    }
    let hw = affinity.cols();
    let width = affinity.width();
    exclude_where(affinity, |row, col| {
        let p = row % hw;
        let d = Displacement::between((p / width, p % width), (col / width, col % width));
        d.magnitude() * scale > radius
    })
}

/// Excludes every FG-BG entry according to ground-truth masks.
pub fn oracle_filter<T: Scalar>(
    affinity: &AffinityMatrix<T>,
    memory_gt: &[HardMask],
    query_gt: &HardMask,
) -> Result<AffinityMatrix<T>> {
    check_masks(
        affinity.slots(),
        affinity.height(),
        affinity.width(),
        memory_gt,
        query_gt,
    )?;
    let hw = affinity.cols();
    Ok(exclude_where(affinity, |row, col| {
        memory_gt[row / hw].is_foreground(row % hw) != query_gt.is_foreground(col)
    }))
}

/// Categories of the entries a filter removed.
pub fn removed_categories<T: Scalar>(
    raw: &AffinityMatrix<T>,
    filtered: &AffinityMatrix<T>,
    memory_gt: &[HardMask],
    query_gt: &HardMask,
) -> Result<CategoryCounts> {
    check_masks(raw.slots(), raw.height(), raw.width(), memory_gt, query_gt)?;
    let hw = raw.cols();
    let mut counts = CategoryCounts::default();
    for col in 0..raw.cols() {
        for (row, (&before, &after)) in raw.column(col).iter().zip(filtered.column(col)).enumerate()
        {
            if !AffinityMatrix::is_excluded(before) && AffinityMatrix::is_excluded(after) {
                counts.add(Category::of(
                    memory_gt[row / hw].is_foreground(row % hw),
                    query_gt.is_foreground(col),
                ));
            }
        }
    }
    Ok(counts)
}
