//! AMAP binary files and 16-bit PGM previews.
//!
//! AMAP layout (all little-endian): `b"AMAP"`, u32 version (1), u32 width,
//! u32 height, then `width * height` f32 values in row-major order.

use std::io::{Read, Write};

use super::{AttentionMap, NormMode};
use crate::error::{Error, Result};

pub const AMAP_MAGIC: &[u8; 4] = b"AMAP";
pub const AMAP_VERSION: u32 = 1;

pub fn write_amap<W: Write>(map: &AttentionMap, mut out: W) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(16 + 4 * map.len());
    buf.extend_from_slice(AMAP_MAGIC);
    buf.extend_from_slice(&AMAP_VERSION.to_le_bytes());
    buf.extend_from_slice(&(map.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(map.height() as u32).to_le_bytes());
    for v in map.values() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)
}

/// Reads an AMAP stream. The result is tagged RAW; the format does not
/// record a normalization mode.
pub fn read_amap<R: Read>(mut input: R) -> Result<AttentionMap> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::format("AMAP", e.to_string()))?;
    if bytes.len() < 16 || &bytes[..4] != AMAP_MAGIC {
        return Err(Error::format("AMAP", "bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != AMAP_VERSION {
        return Err(Error::format("AMAP", format!("unsupported version {version}")));
    }
    let (w, h) = (word(8) as usize, word(12) as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("AMAP", "dimensions overflow"))?;
    if bytes.len() - 16 != expected {
        return Err(Error::format(
            "AMAP",
            format!("{w}x{h} needs {expected} payload bytes, found {}", bytes.len() - 16),
        ));
    }
    let values: Vec<f64> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    AttentionMap::from_values(w, h, values)
        .map_err(|e| Error::format("AMAP", e.to_string()))
        .map(|m| AttentionMap::from_parts(w, h, m.into_values(), NormMode::Raw))
}

/// Binary 16-bit PGM (P5, maxval 65535) scaled by the map maximum.
pub fn write_pgm16<W: Write>(map: &AttentionMap, mut out: W) -> std::io::Result<()> {
    let peak = map.max();
    let mut buf = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
    for v in map.values() {
        let level = if peak > 0.0 {
            (v / peak * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        buf.extend_from_slice(&level.to_be_bytes());
    }
    out.write_all(&buf)
}
