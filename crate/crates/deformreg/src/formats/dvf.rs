//! DVF1 raster: magic `DVF1`, width and height as little-endian `u32`, then
//! `width * height` records of `(dx, dy)` little-endian `f32`, row-major.

use std::path::Path;

use deformreg_core::{DvfRaster, ImageMeta};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DVF1";
const HEADER_LEN: usize = 12;

pub fn encode_dvf(raster: &DvfRaster) -> Vec<u8> {
    let meta = raster.meta();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * raster.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&meta.width.to_le_bytes());
    out.extend_from_slice(&meta.height.to_le_bytes());
    for [dx, dy] in raster.values() {
        out.extend_from_slice(&dx.to_le_bytes());
        out.extend_from_slice(&dy.to_le_bytes());
    }
    out
}

/// Decodes a DVF1 buffer; `path` only labels errors.
pub fn decode_dvf(bytes: &[u8], path: &Path) -> Result<DvfRaster> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected: HEADER_LEN as u64,
            got: bytes.len() as u64,
        });
    }
    let word = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let (w, h) = (word(4), word(8));
    let meta = ImageMeta::new(w, h).map_err(|e| Error::core(path.display().to_string(), e))?;
    let expected = 8 * w as u64 * h as u64;
    let got = (bytes.len() - HEADER_LEN) as u64;
    if got != expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            got,
        });
    }
    let field = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            ]
        })
        .collect();
    DvfRaster::new(meta, field).map_err(|e| Error::core(path.display().to_string(), e))
}

pub fn read_dvf(path: &Path) -> Result<DvfRaster> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dvf(&bytes, path)
}

pub fn write_dvf(raster: &DvfRaster, path: &Path) -> Result<()> {
    std::fs::write(path, encode_dvf(raster)).map_err(|e| Error::io(path, e))
}
