//! DAVIS-style masks: 8-bit palette PNGs where the palette index is the object id.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor_store::HardMask;

/// tEXt keyword used to record the declared object count.
const OBJS_KEYWORD: &str = "objs";

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("png: {e}"))
}

/// The PASCAL VOC / DAVIS colormap entry for `index`.
fn palette_color(index: usize) -> [u8; 3] {
    let mut rgb = [0u8; 3];
    let mut c = index;
    for j in 0..8 {
        for (ch, v) in rgb.iter_mut().enumerate() {
            *v |= (((c >> ch) & 1) as u8) << (7 - j);
        }
        c >>= 3;
    }
    rgb
}

/// Decodes an 8-bit indexed PNG. `objs` comes from an `objs` tEXt chunk when
/// present, otherwise from the largest label in the image.
pub fn decode_png_mask(bytes: &[u8]) -> Result<HardMask> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Indexed {
        return Err(Error::Format(format!(
            "mask PNG must be palette-indexed, found {:?}",
            info.color_type
        )));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "mask PNG must be 8-bit, found {:?}",
            info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let palette_len = info.palette.as_ref().map_or(0, |p| p.len() / 3);
    let declared = info
        .uncompressed_latin1_text
        .iter()
        .find(|t| t.keyword == OBJS_KEYWORD)
        .map(|t| {
            t.text
                .trim()
                .parse::<u8>()
                .map_err(|_| Error::Format(format!("bad objs text chunk {:?}", t.text)))
        })
        .transpose()?;

    let mut buf = vec![
        0u8;
        reader
            .output_buffer_size()
            .ok_or_else(|| png_err("image too large"))?
    ];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let mut labels = Vec::with_capacity(width * height);
    for row in buf[..frame.buffer_size()].chunks_exact(frame.line_size) {
        labels.extend_from_slice(&row[..width]);
    }
    let max_label = labels.iter().copied().max().unwrap_or(0);
    if palette_len > 0 && max_label as usize >= palette_len {
        return Err(Error::Format(format!(
            "label {max_label} outside palette of {palette_len} entries"
        )));
    }
    HardMask::new(height, width, declared.unwrap_or(max_label), labels)
}

/// Encodes a mask as an 8-bit indexed PNG with the DAVIS palette and an
/// `objs` tEXt chunk.
pub fn encode_png_mask(mask: &HardMask) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, mask.width() as u32, mask.height() as u32);
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        let palette: Vec<u8> = (0..=mask.objs() as usize).flat_map(palette_color).collect();
        encoder.set_palette(palette);
        encoder
            .add_text_chunk(OBJS_KEYWORD.to_string(), mask.objs().to_string())
            .map_err(png_err)?;
        let mut writer = encoder.write_header().map_err(png_err)?;
        writer.write_image_data(mask.labels()).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

pub fn write_png_mask(mask: &HardMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_png_mask(mask)?).map_err(|e| Error::io(path, e))
}

pub fn read_png_mask(path: impl AsRef<Path>) -> Result<HardMask> {
    let path = path.as_ref();
    decode_png_mask(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
