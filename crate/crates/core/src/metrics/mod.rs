//! Region similarity 𝒥, boundary accuracy ℱ, their mean, and Spearman's ρ.

mod boundary;
mod eval;
mod region;
mod spearman;

pub use boundary::{boundary_f, boundary_map, DEFAULT_BOUNDARY_TOLERANCE};
pub use eval::{evaluate_video, EvalResult, ObjectEval, VideoEval};
pub use region::jaccard;
pub use spearman::{average_ranks, spearman_rho};

use crate::error::{Error, Result};
use crate::tensor_store::HardMask;

pub(crate) fn check_same_dims(pred: &HardMask, gt: &HardMask) -> Result<()> {
    if !pred.same_dims(gt) {
        return Err(Error::Dimension(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    Ok(())
}
