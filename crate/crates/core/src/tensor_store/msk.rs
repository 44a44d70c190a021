use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor_store::HardMask;

const MAGIC: &[u8; 4] = b"MSK1";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_msk(mask: &HardMask) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + mask.pixel_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(0);
    out.push(mask.objs());
    for d in [mask.height(), mask.width()] {
        let d = u32::try_from(d)
            .map_err(|_| Error::Dimension(format!("dimension {d} does not fit in u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(mask.labels());
    Ok(out)
}

pub fn decode_msk(bytes: &[u8]) -> Result<HardMask> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "MSK1 header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!("bad MSK1 magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported MSK1 version {version}")));
    }
    if bytes[6] != 0 {
        return Err(Error::Format(format!(
            "unsupported MSK1 dtype {}",
            bytes[6]
        )));
    }
    let objs = bytes[7];
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != h * w {
        return Err(Error::Length {
            expected: h * w,
            actual: payload.len(),
        });
    }
    HardMask::new(h, w, objs, payload.to_vec())
}

pub fn write_msk(mask: &HardMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_msk(mask)?).map_err(|e| Error::io(path, e))
}

pub fn read_msk(path: impl AsRef<Path>) -> Result<HardMask> {
    let path = path.as_ref();
    decode_msk(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
