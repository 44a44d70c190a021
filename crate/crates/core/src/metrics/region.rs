use crate::error::Result;
use crate::metrics::check_same_dims;
use crate::tensor_store::HardMask;

/// Intersection over union of the pixels labelled `obj`; 1.0 when both are empty.
pub fn jaccard(pred: &HardMask, gt: &HardMask, obj: u8) -> Result<f64> {
    check_same_dims(pred, gt)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        let (p, g) = (p == obj, g == obj);
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}
