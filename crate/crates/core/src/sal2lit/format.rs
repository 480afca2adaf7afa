//! Versioned binary model file.
//!
//! ```text
//! "S2L1"
//! u32 layer count L (trunk layers followed by the three heads)
//! u32 head count
//! L × (u32 inputs, u32 outputs)
//! L × (f32 weights, outputs × inputs row-major; then f32 biases)
//! ```
//! All integers and floats little-endian. Weights are stored as f32, so a
//! trained model loses precision on its first save; every later
//! save/load cycle is bit-exact.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::network::{Activation, Dense, ModelParams, N_HEADS};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"S2L1";

pub fn write_model<W: Write>(params: &ModelParams, mut out: W) -> Result<()> {
    params.validate()?;
    let layers: Vec<&Dense> = params.trunk.iter().chain(&params.heads).collect();
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(params.heads.len() as u32).to_le_bytes());
    for l in &layers {
        buf.extend_from_slice(&(l.inputs() as u32).to_le_bytes());
        buf.extend_from_slice(&(l.outputs() as u32).to_le_bytes());
    }
    for l in &layers {
        for r in 0..l.outputs() {
            for c in 0..l.inputs() {
                buf.extend_from_slice(&(l.weights[(r, c)] as f32).to_le_bytes());
            }
        }
        for b in l.bias.iter() {
            buf.extend_from_slice(&(*b as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)
        .map_err(|e| Error::format("model file", e.to_string()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::format("model file", "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
}

pub fn read_model<R: Read>(mut input: R) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::format("model file", e.to_string()))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MODEL_MAGIC {
        return Err(Error::format("model file", "bad magic"));
    }
    let n_layers = cur.u32()?;
    let n_heads = cur.u32()?;
    if n_heads != N_HEADS || n_layers < n_heads {
        return Err(Error::format(
            "model file",
            format!("{n_layers} layers with {n_heads} heads"),
        ));
    }
    let mut dims = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        dims.push((cur.u32()?, cur.u32()?));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for &(inputs, outputs) in &dims {
        let count = inputs
            .checked_mul(outputs)
            .ok_or_else(|| Error::format("model file", "layer too large"))?;
        let mut w = Vec::with_capacity(count);
        for _ in 0..count {
            w.push(cur.f32()?);
        }
        let mut b = Vec::with_capacity(outputs);
        for _ in 0..outputs {
            b.push(cur.f32()?);
        }
        layers.push(Dense {
            weights: DMatrix::from_row_slice(outputs, inputs, &w),
            bias: DVector::from_vec(b),
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::format("model file", "trailing bytes"));
    }
    let heads = layers.split_off(n_layers - n_heads);
    let params = ModelParams {
        trunk: layers,
        heads,
        activation: Activation::Relu,
    };
    params
        .validate()
        .map_err(|e| Error::format("model file", e.to_string()))?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sal2lit::DEFAULT_HIDDEN;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = ModelParams::new(24, &DEFAULT_HIDDEN, 5, &mut rng);
        let mut first = Vec::new();
        write_model(&p, &mut first).unwrap();
        let loaded = read_model(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_model(&loaded, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(loaded.hidden_widths(), DEFAULT_HIDDEN.to_vec());
        for (a, b) in p.slices().iter().zip(loaded.slices()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
    }

    #[test]
    fn header_layout() {
        let p = ModelParams::zeros(2, &[3], 2);
        let mut buf = Vec::new();
        write_model(&p, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"S2L1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 3);
        let floats = (2 * 3 + 3) + 3 * (3 * 2 + 2);
        assert_eq!(buf.len(), 12 + 4 * 8 + 4 * floats);
    }

    #[test]
    fn corrupt_files_rejected() {
        let p = ModelParams::zeros(2, &[3], 2);
        let mut buf = Vec::new();
        write_model(&p, &mut buf).unwrap();
        assert!(read_model(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_model(extra.as_slice()).is_err());
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(read_model(magic.as_slice()).is_err());
        let mut dims = buf;
        dims[16] = 4;
        assert!(read_model(dims.as_slice()).is_err());
    }
}
