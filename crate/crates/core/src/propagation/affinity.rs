use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::MemoryBank;
use crate::scalar::Scalar;
use crate::tensor_store::FeatureMap;

/// Similarity between a memory feature vector and a query feature vector.
/// Larger is more similar for every variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    /// Dot product of channel-wise L2-normalized vectors.
    Cos,
    /// Negated L1 distance.
    L1,
    /// Negated Euclidean distance.
    L2,
}

impl Similarity {
    /// Default softmax temperature; COS scores live in [-1, 1] while the
    /// distance-based scores scale with feature magnitude.
    pub fn default_temperature(self) -> f64 {
        match self {
            Similarity::Cos => 0.07,
            Similarity::L1 | Similarity::L2 => 1.0,
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Similarity::Cos => "cos",
            Similarity::L1 => "l1",
            Similarity::L2 => "l2",
        })
    }
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cos" => Ok(Similarity::Cos),
            "l1" => Ok(Similarity::L1),
            "l2" => Ok(Similarity::L2),
            other => Err(Error::InvalidArgument(format!(
                "unknown affinity {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffinityConfig<T> {
    pub similarity: Similarity,
    pub topk: usize,
    pub temperature: T,
}

impl<T: Scalar> AffinityConfig<T> {
    pub const DEFAULT_TOPK: usize = 10;

    pub fn new(similarity: Similarity) -> Self {
        Self {
            similarity,
            topk: Self::DEFAULT_TOPK,
            temperature: T::of(similarity.default_temperature()),
        }
    }

    pub fn with_topk(mut self, topk: usize) -> Self {
        self.topk = topk;
        self
    }

    pub fn with_temperature(mut self, temperature: T) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.topk == 0 {
            return Err(Error::InvalidArgument("topk must be >= 1".into()));
        }
        if !(self.temperature > T::zero() && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Scores between every memory pixel (rows) and every query pixel (columns).
///
/// Row `r` is memory slot `r / (H*W)`, pixel `r % (H*W)`. Storage is
/// column-contiguous so each query pixel's candidates form one slice.
/// Filtered entries hold `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix<T> {
    slots: usize,
    height: usize,
    width: usize,
    scores: Vec<T>,
}

impl<T: Scalar> AffinityMatrix<T> {
    /// Builds from row-major scores (`data[row * cols + col]`).
    pub fn from_row_major(slots: usize, height: usize, width: usize, data: &[T]) -> Result<Self> {
        let hw = height * width;
        let rows = slots * hw;
        if slots == 0 || hw == 0 {
            return Err(Error::Dimension(
                "affinity needs >= 1 slot and pixel".into(),
            ));
        }
        if data.len() != rows * hw {
            return Err(Error::Length {
                expected: rows * hw,
                actual: data.len(),
            });
        }
        let mut scores = vec![T::zero(); rows * hw];
        for r in 0..rows {
            for c in 0..hw {
                scores[c * rows + r] = data[r * hw + c];
            }
        }
        Self::from_columns(slots, height, width, scores)
    }

    pub(crate) fn from_columns(
        slots: usize,
        height: usize,
        width: usize,
        scores: Vec<T>,
    ) -> Result<Self> {
        if let Some(index) = scores
            .iter()
            .position(|v| v.is_nan() || *v == T::infinity())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            slots,
            height,
            width,
            scores,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.slots * self.height * self.width
    }

    pub fn cols(&self) -> usize {
        self.height * self.width
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.scores[col * self.rows() + row]
    }

    pub fn column(&self, col: usize) -> &[T] {
        let rows = self.rows();
        &self.scores[col * rows..(col + 1) * rows]
    }

    pub(crate) fn scores_mut(&mut self) -> &mut [T] {
        &mut self.scores
    }

    pub fn is_excluded(value: T) -> bool {
        value == T::neg_infinity()
    }

    /// Number of entries not excluded by a filter.
    pub fn surviving(&self) -> usize {
        self.scores
            .iter()
            .filter(|v| !Self::is_excluded(**v))
            .count()
    }

    /// `(slot, y, x)` of a memory row.
    pub fn memory_pixel(&self, row: usize) -> (usize, usize, usize) {
        let hw = self.cols();
        let p = row % hw;
        (row / hw, p / self.width, p % self.width)
    }

    /// `(y, x)` of a query column.
    pub fn query_pixel(&self, col: usize) -> (usize, usize) {
        (col / self.width, col % self.width)
    }

    /// Applies a strictly monotone map to every non-excluded score.
    pub fn map_scores(&self, f: impl Fn(T) -> T) -> Self {
        let scores = self
            .scores
            .iter()
            .map(|&v| if Self::is_excluded(v) { v } else { f(v) })
            .collect();
        Self {
            scores,
            ..self.clone()
        }
    }
}

fn normalize_rows<T: Scalar>(vectors: &mut [T], channels: usize) {
    for v in vectors.chunks_exact_mut(channels) {
        let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm > T::zero() {
            v.iter_mut().for_each(|x| *x = *x / norm);
        } else {
            v.iter_mut().for_each(|x| *x = T::zero());
        }
    }
}

/// Affinity between an ordered list of memory feature maps and a query map.
pub fn affinity_between<T: Scalar>(
    memory: &[&FeatureMap<T>],
    query: &FeatureMap<T>,
    similarity: Similarity,
) -> Result<AffinityMatrix<T>> {
    let first = memory
        .first()
        .ok_or_else(|| Error::InvalidArgument("memory is empty".into()))?;
    for m in memory {
        if !m.same_shape(query) {
            return Err(Error::Dimension(format!(
                "memory features {}x{}x{} vs query {}x{}x{}",
                m.channels(),
                m.height(),
                m.width(),
                query.channels(),
                query.height(),
                query.width()
            )));
        }
    }
    let c = first.channels();
    let hw = query.pixel_count();
    let rows = memory.len() * hw;

    let mut mem: Vec<T> = Vec::with_capacity(rows * c);
    for m in memory {
        mem.extend(m.pixel_vectors());
    }
    let mut qry = query.pixel_vectors();
    if similarity == Similarity::Cos {
        normalize_rows(&mut mem, c);
        normalize_rows(&mut qry, c);
    }

    let mut scores = vec![T::zero(); rows * hw];
    scores
        .par_chunks_mut(rows)
        .zip(qry.par_chunks(c))
        .for_each(|(out, q)| {
            for (score, m) in out.iter_mut().zip(mem.chunks_exact(c)) {
                *score = match similarity {
                    Similarity::Cos => m.iter().zip(q).map(|(&a, &b)| a * b).sum(),
                    Similarity::L1 => -m.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<T>(),
                    Similarity::L2 => -m
                        .iter()
                        .zip(q)
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum::<T>()
                        .sqrt(),
                };
            }
        });
    AffinityMatrix::from_columns(memory.len(), query.height(), query.width(), scores)
}

/// Affinity between every entry of `bank` (in slot order) and `query`.
pub fn compute_affinity<T: Scalar>(
    bank: &MemoryBank<T>,
    query: &FeatureMap<T>,
    cfg: &AffinityConfig<T>,
) -> Result<AffinityMatrix<T>> {
    if bank.is_empty() {
        return Err(Error::InvalidArgument("memory bank is empty".into()));
    }
    let memory: Vec<&FeatureMap<T>> = bank.entries().map(|e| &e.features).collect();
    affinity_between(&memory, query, cfg.similarity)
}
