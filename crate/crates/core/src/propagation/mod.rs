//! Memory-bank label propagation: affinity between memory and query features,
//! then a top-k softmax readout of the memory soft labels.

mod affinity;
mod memory;
mod predict;

pub use affinity::{
    affinity_between, compute_affinity, AffinityConfig, AffinityMatrix, Similarity,
};
pub use memory::{MemoryBank, MemoryEntry};
pub use predict::{harden, propagate_mask, step, top_k, Prediction, StepOutput};
