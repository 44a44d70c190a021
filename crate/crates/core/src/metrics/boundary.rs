use crate::error::{Error, Result};
use crate::metrics::check_same_dims;
use crate::tensor_store::HardMask;

/// Boundary match tolerance as a fraction of the image diagonal.
pub const DEFAULT_BOUNDARY_TOLERANCE: f64 = 0.008;

/// One-pixel boundary of the region labelled `obj`: a pixel is on the boundary
/// when it differs from any in-bounds neighbour to its right, below, or
/// below-right.
pub fn boundary_map(mask: &HardMask, obj: u8) -> Vec<bool> {
    let (h, w) = (mask.height(), mask.width());
    let seg: Vec<bool> = mask.labels().iter().map(|&l| l == obj).collect();
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let v = seg[y * w + x];
            let right = x + 1 < w && seg[y * w + x + 1] != v;
            let down = y + 1 < h && seg[(y + 1) * w + x] != v;
            let diag = x + 1 < w && y + 1 < h && seg[(y + 1) * w + x + 1] != v;
            out[y * w + x] = right || down || diag;
        }
    }
    out
}

/// Match radius in pixels: fractions below 1 scale the image diagonal.
fn match_radius(tolerance: f64, h: usize, w: usize) -> usize {
    if tolerance >= 1.0 {
        tolerance as usize
    } else {
        (tolerance * ((h * h + w * w) as f64).sqrt()).ceil() as usize
    }
}

fn dilate(map: &[bool], h: usize, w: usize, radius: usize) -> Vec<bool> {
    let r = radius as i64;
    let disk: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
        .filter(|(dy, dx)| dy * dy + dx * dx <= r * r)
        .collect();
    let mut out = vec![false; h * w];
    for (i, _) in map.iter().enumerate().filter(|(_, &b)| b) {
        let (y, x) = ((i / w) as i64, (i % w) as i64);
        for &(dy, dx) in &disk {
            let (yy, xx) = (y + dy, x + dx);
            if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                out[yy as usize * w + xx as usize] = true;
            }
        }
    }
    out
}

/// Boundary F-measure for object `obj`, matching boundary pixels within a
/// disc whose radius is `tolerance` of the image diagonal (rounded up).
pub fn boundary_f(pred: &HardMask, gt: &HardMask, obj: u8, tolerance: f64) -> Result<f64> {
    check_same_dims(pred, gt)?;
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "boundary tolerance must be positive, got {tolerance}"
        )));
    }
    let (h, w) = (pred.height(), pred.width());
    let pb = boundary_map(pred, obj);
    let gb = boundary_map(gt, obj);
    let n_pred = pb.iter().filter(|&&b| b).count();
    let n_gt = gb.iter().filter(|&&b| b).count();
    let (precision, recall) = match (n_pred, n_gt) {
        (0, 0) => return Ok(1.0),
        (0, _) => (1.0, 0.0),
        (_, 0) => (0.0, 1.0),
        _ => {
            let radius = match_radius(tolerance, h, w);
            let gd = dilate(&gb, h, w, radius);
            let pd = dilate(&pb, h, w, radius);
            let pred_hit = pb.iter().zip(&gd).filter(|(&b, &d)| b && d).count();
            let gt_hit = gb.iter().zip(&pd).filter(|(&b, &d)| b && d).count();
            (pred_hit as f64 / n_pred as f64, gt_hit as f64 / n_gt as f64)
        }
    };
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}
