use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"FMAP";
const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;
const HEADER_LEN: usize = 20;

/// Provenance of a feature map. Not stored in FMAP files; carried by manifests.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub model: String,
    pub layer: Option<u32>,
    pub timestep: Option<u32>,
    pub source_frame: Option<PathBuf>,
    /// Original image size as (height, width).
    pub image_size: Option<(usize, usize)>,
}

/// Dense `C x H x W` feature grid, channel-major then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
    pub meta: FeatureMeta,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "feature map dims must be >= 1, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::Length {
                expected,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
            meta: FeatureMeta::default(),
        })
    }

    /// Builds a map from pixel-major vectors (`H*W` rows of `C` values).
    pub fn from_pixels(channels: usize, height: usize, width: usize, pixels: &[T]) -> Result<Self> {
        let hw = height * width;
        if pixels.len() != channels * hw {
            return Err(Error::Length {
                expected: channels * hw,
                actual: pixels.len(),
            });
        }
        let mut data = vec![T::zero(); channels * hw];
        for p in 0..hw {
            for c in 0..channels {
                data[c * hw + p] = pixels[p * channels + c];
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn with_meta(mut self, meta: FeatureMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Transposes into pixel-major order: `H*W` contiguous vectors of length `C`.
    pub fn pixel_vectors(&self) -> Vec<T> {
        let hw = self.pixel_count();
        let mut out = vec![T::zero(); self.data.len()];
        for c in 0..self.channels {
            let plane = &self.data[c * hw..(c + 1) * hw];
            for (p, &v) in plane.iter().enumerate() {
                out[p * self.channels + c] = v;
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMap<U> {
        FeatureMap {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn same_shape(&self, other: &FeatureMap<T>) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }
}

pub fn encode_fmap(map: &FeatureMap<f32>) -> Result<Vec<u8>> {
    if let Some(index) = map.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let dims = [map.channels, map.height, map.width];
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(0);
    for d in dims {
        let d = u32::try_from(d)
            .map_err(|_| Error::Dimension(format!("dimension {d} does not fit in u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in &map.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_fmap(bytes: &[u8]) -> Result<FeatureMap<f32>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "FMAP header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!("bad FMAP magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported FMAP version {version}")));
    }
    if bytes[6] != DTYPE_F32 {
        return Err(Error::Format(format!(
            "unsupported FMAP dtype {}",
            bytes[6]
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (c, h, w) = (u32_at(8), u32_at(12), u32_at(16));
    let expected = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Format("FMAP dims overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected * 4 {
        return Err(Error::Length {
            expected,
            actual: payload.len() / 4,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureMap::new(c, h, w, data)
}

pub fn write_fmap(map: &FeatureMap<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_fmap(map)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_fmap(path: impl AsRef<Path>) -> Result<FeatureMap<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fmap(&bytes)
}
