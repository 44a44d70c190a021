//! Argmax correspondences between query and memory pixels, their FG/BG
//! categorization, and the filters that exclude affinity entries.
//!
//! Each query pixel is matched to its highest-scoring memory pixel. A
//! correspondence is FG-FG when both endpoints are foreground, BG-BG when
//! both are background and FG-BG otherwise; FG-BG matches are the errors the
//! filters try to remove. Multi-object masks are binarized as "any object".

mod diagnostics;
mod filter;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

pub use diagnostics::{diagnose, PairDiagnostics};
pub use filter::{
    mag_filter, mag_filter_scaled, oracle_filter, removed_categories, CorrespondenceFilter,
    FilterReport, MagUnits,
};

use crate::error::{Error, Result};
use crate::propagation::AffinityMatrix;
use crate::scalar::Scalar;
use crate::tensor_store::HardMask;

/// Memory-to-query offset in feature-grid cells: `query - memory`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Displacement {
    pub dy: i64,
    pub dx: i64,
}

impl Displacement {
    pub fn between(memory: (usize, usize), query: (usize, usize)) -> Self {
        Self {
            dy: query.0 as i64 - memory.0 as i64,
            dx: query.1 as i64 - memory.1 as i64,
        }
    }

    pub fn squared(&self) -> i64 {
        self.dy * self.dy + self.dx * self.dx
    }

    pub fn magnitude(&self) -> f64 {
        (self.squared() as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    FgFg,
    BgBg,
    FgBg,
    Unknown,
}

impl Category {
    pub fn of(memory_fg: bool, query_fg: bool) -> Self {
        match (memory_fg, query_fg) {
            (true, true) => Category::FgFg,
            (false, false) => Category::BgBg,
            _ => Category::FgBg,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub fg_fg: usize,
    pub bg_bg: usize,
    pub fg_bg: usize,
    pub unknown: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, c: Category) {
        match c {
            Category::FgFg => self.fg_fg += 1,
            Category::BgBg => self.bg_bg += 1,
            Category::FgBg => self.fg_bg += 1,
            Category::Unknown => self.unknown += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.fg_fg + self.bg_bg + self.fg_bg + self.unknown
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence<T> {
    pub query: (usize, usize),
    pub slot: usize,
    pub memory: (usize, usize),
    /// Row of the matched memory pixel in the affinity matrix.
    pub memory_row: usize,
    pub score: T,
    pub displacement: Displacement,
    pub category: Category,
}

/// One correspondence per query pixel, in query raster order.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceSet<T> {
    pub height: usize,
    pub width: usize,
    pub slots: usize,
    pub entries: Vec<Correspondence<T>>,
}

impl<T: Scalar> CorrespondenceSet<T> {
    pub fn counts(&self) -> CategoryCounts {
        let mut counts = CategoryCounts::default();
        for e in &self.entries {
            counts.add(e.category);
        }
        counts
    }
}

/// Matches every query pixel to its argmax memory pixel (ties to the lowest row).
/// Displacements ignore the memory slot.
pub fn extract_correspondences<T: Scalar>(affinity: &AffinityMatrix<T>) -> CorrespondenceSet<T> {
    let entries = (0..affinity.cols())
        .map(|col| {
            let column = affinity.column(col);
            let mut best = 0;
            for (row, &v) in column.iter().enumerate().skip(1) {
                if v > column[best] {
                    best = row;
                }
            }
            let (slot, my, mx) = affinity.memory_pixel(best);
            let query = affinity.query_pixel(col);
            Correspondence {
                query,
                slot,
                memory: (my, mx),
                memory_row: best,
                score: column[best],
                displacement: Displacement::between((my, mx), query),
                category: Category::Unknown,
            }
        })
        .collect();
    CorrespondenceSet {
        height: affinity.height(),
        width: affinity.width(),
        slots: affinity.slots(),
        entries,
    }
}

pub(crate) fn check_masks(
    slots: usize,
    height: usize,
    width: usize,
    memory: &[HardMask],
    query: &HardMask,
) -> Result<()> {
    if memory.len() != slots {
        return Err(Error::MissingGroundTruth(format!(
            "{} memory masks for {slots} memory slots",
            memory.len()
        )));
    }
    for m in memory.iter().chain(std::iter::once(query)) {
        if m.height() != height || m.width() != width {
            return Err(Error::Dimension(format!(
                "mask {}x{} vs feature grid {height}x{width}",
                m.height(),
                m.width()
            )));
        }
    }
    Ok(())
}

/// Tags each correspondence using hard masks at feature resolution, one per
/// memory slot plus the query mask.
pub fn categorize<T: Scalar>(
    corrs: &CorrespondenceSet<T>,
    memory: &[HardMask],
    query: &HardMask,
) -> Result<CorrespondenceSet<T>> {
    check_masks(corrs.slots, corrs.height, corrs.width, memory, query)?;
    let w = corrs.width;
    let entries = corrs
        .entries
        .iter()
        .map(|e| {
            let mem_fg = memory[e.slot].is_foreground(e.memory.0 * w + e.memory.1);
            let q_fg = query.is_foreground(e.query.0 * w + e.query.1);
            Correspondence {
                category: Category::of(mem_fg, q_fg),
                ..e.clone()
            }
        })
        .collect();
    Ok(CorrespondenceSet {
        entries,
        ..corrs.clone()
    })
}

struct Ranked<T> {
    score: T,
    index: usize,
}

impl<T: Scalar> PartialEq for Ranked<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Ranked<T> {}

impl<T: Scalar> PartialOrd for Ranked<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Ranked<T> {
    /// Greater means worse: lower score, then higher index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .partial_cmp(&self.score)
            .unwrap_or(Ordering::Equal)
            .then(self.index.cmp(&other.index))
    }
}

/// Fraction of the `k` globally highest affinity entries whose endpoints are
/// FG-BG. Ties are broken towards the lower row-major `(row, col)` index.
pub fn fg_bg_percentage<T: Scalar>(
    affinity: &AffinityMatrix<T>,
    memory: &[HardMask],
    query: &HardMask,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    check_masks(
        affinity.slots(),
        affinity.height(),
        affinity.width(),
        memory,
        query,
    )?;
    let cols = affinity.cols();
    let available = affinity.surviving();
    if k > available {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {available} available affinity entries"
        )));
    }
    let mut heap: BinaryHeap<Ranked<T>> = BinaryHeap::with_capacity(k + 1);
    for col in 0..cols {
        for (row, &score) in affinity.column(col).iter().enumerate() {
            if AffinityMatrix::is_excluded(score) {
                continue;
            }
            let cand = Ranked {
                score,
                index: row * cols + col,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("heap holds k entries") {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    let hw = cols;
    let mismatched = heap
        .iter()
        .filter(|c| {
            let (row, col) = (c.index / cols, c.index % cols);
            memory[row / hw].is_foreground(row % hw) != query.is_foreground(col)
        })
        .count();
    Ok(mismatched as f64 / k as f64)
}
