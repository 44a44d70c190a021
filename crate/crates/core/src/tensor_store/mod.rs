//! File formats, mask types and resampling shared between the feature
//! extractor and the propagation engine.
//!
//! Two little-endian binary formats are defined here:
//!
//! ```text
//! FMAP  0..4 "FMAP" | 4..6 u16 version=1 | 6 u8 dtype=0 (f32) | 7 reserved=0
//!       8..12 u32 C | 12..16 u32 H | 16..20 u32 W | C*H*W f32, channel-major then row-major
//! MSK1  0..4 "MSK1" | 4..6 u16 version=1 | 6 u8 dtype=0 (u8) | 7 u8 objs
//!       8..12 u32 H | 12..16 u32 W | H*W u8 labels, row-major
//! ```

mod fmap;
mod manifest;
mod mask;
mod msk;
mod png_mask;
mod resample;

pub use fmap::{decode_fmap, encode_fmap, read_fmap, write_fmap, FeatureMap, FeatureMeta};
pub use manifest::{
    DatasetIndex, ExtractionMeta, FeatureEntry, FeatureKey, FrameEntry, VideoManifest,
};
pub use mask::{HardMask, LabelMask, SoftMask, SOFT_SUM_TOLERANCE};
pub use msk::{decode_msk, encode_msk, read_msk, write_msk};
pub use png_mask::{decode_png_mask, encode_png_mask, read_png_mask, write_png_mask};
pub use resample::{resample_mask, upsample_to_hard, ResampleDirection};

use std::path::Path;

use crate::error::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Reads a hard label mask from either an MSK1 file or an 8-bit indexed PNG,
/// sniffing the format from the leading bytes.
pub fn read_mask(path: impl AsRef<Path>) -> Result<HardMask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"MSK1") {
        decode_msk(&bytes)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png_mask(&bytes)
    } else {
        Err(Error::Format(format!(
            "{}: neither an MSK1 file nor a PNG",
            path.display()
        )))
    }
}
