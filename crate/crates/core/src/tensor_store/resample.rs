use crate::error::{Error, Result};
use crate::propagation::harden;
use crate::scalar::Scalar;
use crate::tensor_store::{HardMask, LabelMask, SoftMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResampleDirection {
    /// Area-fraction pooling towards the feature grid.
    Down,
    /// Bilinear interpolation towards image resolution.
    Up,
}

/// Resamples a mask to `target_h x target_w`. Both directions return a soft
/// mask whose per-pixel columns sum to 1; use [`upsample_to_hard`] or
/// [`harden`] for labels.
pub fn resample_mask<T: Scalar>(
    mask: &LabelMask<T>,
    target_h: usize,
    target_w: usize,
    direction: ResampleDirection,
) -> Result<LabelMask<T>> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::Dimension(format!(
            "resample target must be >= 1x1, got {target_h}x{target_w}"
        )));
    }
    let src = mask.to_soft();
    let mut out = match direction {
        ResampleDirection::Down => area_pool(&src, target_h, target_w),
        ResampleDirection::Up => bilinear(&src, target_h, target_w),
    };
    out.renormalize();
    Ok(LabelMask::Soft(out))
}

/// Bilinear upsampling followed by per-pixel argmax (ties to the lowest label).
pub fn upsample_to_hard<T: Scalar>(
    mask: &SoftMask<T>,
    target_h: usize,
    target_w: usize,
) -> Result<HardMask> {
    match resample_mask(
        &LabelMask::Soft(mask.clone()),
        target_h,
        target_w,
        ResampleDirection::Up,
    )? {
        LabelMask::Soft(s) => Ok(harden(&s)),
        LabelMask::Hard(h) => Ok(h),
    }
}

/// For each target index along one axis, the source indices it covers and the
/// overlap length of each, in source-pixel units.
fn coverage(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|t| {
            let lo = (t * src) as f64 / dst as f64;
            let hi = ((t + 1) * src) as f64 / dst as f64;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            let mut cells = Vec::with_capacity(last - first);
            for s in first..last {
                let overlap = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                if overlap > 0.0 {
                    cells.push((s, overlap / scale));
                }
            }
            cells
        })
        .collect()
}

fn area_pool<T: Scalar>(src: &SoftMask<T>, th: usize, tw: usize) -> SoftMask<T> {
    let (sh, sw) = (src.height(), src.width());
    let rows = coverage(sh, th);
    let cols = coverage(sw, tw);
    let planes = src.plane_count();
    let mut out = vec![T::zero(); planes * th * tw];
    for l in 0..planes {
        let plane = src.plane(l);
        for (ty, row_cells) in rows.iter().enumerate() {
            for (tx, col_cells) in cols.iter().enumerate() {
                let mut acc = 0.0;
                for &(sy, wy) in row_cells {
                    for &(sx, wx) in col_cells {
                        acc += wy * wx * plane[sy * sw + sx].as_f64();
                    }
                }
                out[l * th * tw + ty * tw + tx] = T::of(acc);
            }
        }
    }
    SoftMask::new_unchecked(th, tw, src.objs(), out).expect("dims computed above")
}

/// Half-pixel-centre sample positions with edge clamping.
fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|t| {
            let pos = ((t as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}

fn bilinear<T: Scalar>(src: &SoftMask<T>, th: usize, tw: usize) -> SoftMask<T> {
    let (sh, sw) = (src.height(), src.width());
    let ys = taps(sh, th);
    let xs = taps(sw, tw);
    let planes = src.plane_count();
    let mut out = vec![T::zero(); planes * th * tw];
    for l in 0..planes {
        let plane = src.plane(l);
        let at = |y: usize, x: usize| plane[y * sw + x].as_f64();
        for (ty, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (tx, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out[l * th * tw + ty * tw + tx] = T::of(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    SoftMask::new_unchecked(th, tw, src.objs(), out).expect("dims computed above")
}
