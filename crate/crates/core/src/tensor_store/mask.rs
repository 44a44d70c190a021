use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-pixel sums of a soft mask must land within this distance of 1.
pub const SOFT_SUM_TOLERANCE: f64 = 1e-5;

/// Per-pixel object labels; 0 is background, `1..=objs` are objects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardMask {
    height: usize,
    width: usize,
    objs: u8,
    labels: Vec<u8>,
}

impl HardMask {
    pub fn new(height: usize, width: usize, objs: u8, labels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "mask dims must be >= 1, got {height}x{width}"
            )));
        }
        if labels.len() != height * width {
            return Err(Error::Length {
                expected: height * width,
                actual: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > objs) {
            return Err(Error::Format(format!("label {bad} exceeds objs = {objs}")));
        }
        Ok(Self {
            height,
            width,
            objs,
            labels,
        })
    }

    pub fn background(height: usize, width: usize, objs: u8) -> Result<Self> {
        Self::new(height, width, objs, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn objs(&self) -> u8 {
        self.objs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn pixel_count(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Union of all objects.
    pub fn is_foreground(&self, index: usize) -> bool {
        self.labels[index] > 0
    }

    /// Largest label actually present.
    pub fn max_label(&self) -> u8 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn same_dims(&self, other: &HardMask) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Per-pixel probability distribution over background plus `objs` objects,
/// stored as `objs + 1` planes of `H*W` values; plane 0 is background.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftMask<T> {
    height: usize,
    width: usize,
    objs: u8,
    planes: Vec<T>,
}

impl<T: Scalar> SoftMask<T> {
    /// Validates ranges and per-pixel sums.
    pub fn new(height: usize, width: usize, objs: u8, planes: Vec<T>) -> Result<Self> {
        let mask = Self::new_unchecked(height, width, objs, planes)?;
        mask.validate()?;
        Ok(mask)
    }

    pub(crate) fn new_unchecked(
        height: usize,
        width: usize,
        objs: u8,
        planes: Vec<T>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "mask dims must be >= 1, got {height}x{width}"
            )));
        }
        let expected = (objs as usize + 1) * height * width;
        if planes.len() != expected {
            return Err(Error::Length {
                expected,
                actual: planes.len(),
            });
        }
        Ok(Self {
            height,
            width,
            objs,
            planes,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let hw = self.pixel_count();
        let tol = SOFT_SUM_TOLERANCE;
        for p in 0..hw {
            let mut sum = 0.0;
            for l in 0..self.plane_count() {
                let v = self.planes[l * hw + p].as_f64();
                if !(-tol..=1.0 + tol).contains(&v) {
                    return Err(Error::Format(format!(
                        "soft mask value {v} at plane {l}, pixel {p} outside [0, 1]"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > tol {
                return Err(Error::Format(format!(
                    "soft mask pixel {p} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    pub fn one_hot(mask: &HardMask) -> Self {
        let hw = mask.pixel_count();
        let mut planes = vec![T::zero(); (mask.objs as usize + 1) * hw];
        for (p, &l) in mask.labels.iter().enumerate() {
            planes[l as usize * hw + p] = T::one();
        }
        Self {
            height: mask.height,
            width: mask.width,
            objs: mask.objs,
            planes,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn objs(&self) -> u8 {
        self.objs
    }

    pub fn plane_count(&self) -> usize {
        self.objs as usize + 1
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn planes(&self) -> &[T] {
        &self.planes
    }

    pub fn plane(&self, label: usize) -> &[T] {
        let hw = self.pixel_count();
        &self.planes[label * hw..(label + 1) * hw]
    }

    pub fn prob(&self, label: usize, pixel: usize) -> T {
        self.planes[label * self.pixel_count() + pixel]
    }

    pub fn cast<U: Scalar>(&self) -> SoftMask<U> {
        SoftMask {
            height: self.height,
            width: self.width,
            objs: self.objs,
            planes: self.planes.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    /// Divides each pixel column by its sum; columns summing to zero become background.
    pub(crate) fn renormalize(&mut self) {
        let hw = self.pixel_count();
        let planes = self.plane_count();
        for p in 0..hw {
            let sum: T = (0..planes).map(|l| self.planes[l * hw + p]).sum();
            if sum > T::zero() {
                for l in 0..planes {
                    self.planes[l * hw + p] = self.planes[l * hw + p] / sum;
                }
            } else {
                for l in 0..planes {
                    self.planes[l * hw + p] = if l == 0 { T::one() } else { T::zero() };
                }
            }
        }
    }
}

/// A mask in either representation.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelMask<T> {
    Hard(HardMask),
    Soft(SoftMask<T>),
}

impl<T: Scalar> LabelMask<T> {
    pub fn height(&self) -> usize {
        match self {
            LabelMask::Hard(m) => m.height(),
            LabelMask::Soft(m) => m.height(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            LabelMask::Hard(m) => m.width(),
            LabelMask::Soft(m) => m.width(),
        }
    }

    pub fn objs(&self) -> u8 {
        match self {
            LabelMask::Hard(m) => m.objs(),
            LabelMask::Soft(m) => m.objs(),
        }
    }

    pub fn to_soft(&self) -> SoftMask<T> {
        match self {
            LabelMask::Hard(m) => SoftMask::one_hot(m),
            LabelMask::Soft(m) => m.clone(),
        }
    }

    pub fn to_hard(&self) -> HardMask {
        match self {
            LabelMask::Hard(m) => m.clone(),
            LabelMask::Soft(m) => crate::propagation::harden(m),
        }
    }
}
