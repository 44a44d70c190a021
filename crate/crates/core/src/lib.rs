//! Zero-shot video object segmentation by feature-affinity label propagation.
//!
//! A first-frame mask is carried through a video by matching per-frame feature
//! maps (exported by an external extractor) against a memory bank of past frames
//! and their predicted soft masks. The crate provides:
//!
//! - [`tensor_store`]: the FMAP / MSK1 binary formats, indexed-PNG masks,
//!   per-video manifests and mask resampling.
//! - [`propagation`]: affinity matrices (COS / L1 / L2), the memory bank and
//!   top-k softmax label propagation.
//! - [`correspondence`]: argmax correspondences, FG/BG categorization, the
//!   FG-BG percentage diagnostic, and the magnitude and oracle filters.
//! - [`metrics`]: region Jaccard, boundary F-measure, J&F aggregation and
//!   Spearman rank correlation.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*32` / `*64`
//! aliases below name the concrete instantiations.

pub mod correspondence;
pub mod error;
pub mod metrics;
pub mod propagation;
pub mod scalar;
pub mod tensor_store;

pub use correspondence::{
    categorize, extract_correspondences, fg_bg_percentage, mag_filter, oracle_filter, Category,
    CategoryCounts, Correspondence, CorrespondenceFilter, CorrespondenceSet, Displacement,
    FilterReport, MagUnits,
};
pub use error::{Error, Result};
pub use metrics::{boundary_f, evaluate_video, jaccard, spearman_rho, EvalResult, VideoEval};
pub use propagation::{
    compute_affinity, harden, propagate_mask, step, AffinityConfig, AffinityMatrix, MemoryBank,
    MemoryEntry, Prediction, Similarity, StepOutput,
};
pub use scalar::Scalar;
pub use tensor_store::{
    read_fmap, read_mask, resample_mask, write_fmap, FeatureKey, FeatureMap, FeatureMeta, HardMask,
    LabelMask, ResampleDirection, SoftMask,
};

pub type FeatureMap32 = FeatureMap<f32>;
pub type FeatureMap64 = FeatureMap<f64>;
pub type SoftMask32 = SoftMask<f32>;
pub type SoftMask64 = SoftMask<f64>;
pub type AffinityMatrix32 = AffinityMatrix<f32>;
pub type AffinityMatrix64 = AffinityMatrix<f64>;
pub type MemoryBank32 = MemoryBank<f32>;
pub type MemoryBank64 = MemoryBank<f64>;
pub type AffinityConfig32 = AffinityConfig<f32>;
pub type AffinityConfig64 = AffinityConfig<f64>;
