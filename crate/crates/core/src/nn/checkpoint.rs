//! `VPNN` network checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "VPNN" | version u32 | layer count u32 | (in u32, out u32) per layer |
//! per layer: weights f32 row-major (out x in), then biases f32
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::mlp::{Layer, NetworkParams};

pub const MAGIC: &[u8; 4] = b"VPNN";
pub const VERSION: u32 = 1;

pub fn encode(params: &NetworkParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * params.layers().len() + 4 * params.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layers().len() as u32).to_le_bytes());
    for l in params.layers() {
        out.extend_from_slice(&(l.in_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(l.out_dim() as u32).to_le_bytes());
    }
    for l in params.layers() {
        for v in l.weights.iter().chain(l.bias.iter()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format("unexpected end of file"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn decode(bytes: &[u8]) -> Result<NetworkParams> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::format("bad magic, expected VPNN"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported VPNN version {version}")));
    }
    let count = r.u32()? as usize;
    if count == 0 || count > 1024 {
        return Err(Error::format(format!("implausible layer count {count}")));
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        let (i, o) = (r.u32()? as usize, r.u32()? as usize);
        dims.push((i, o));
    }
    let mut layers = Vec::with_capacity(count);
    for (i, o) in dims {
        let n = i.checked_mul(o).ok_or_else(|| Error::format("layer size overflow"))?;
        // bound before allocating
        if n.saturating_add(o).saturating_mul(4) > bytes.len() {
            return Err(Error::format("unexpected end of file"));
        }
        let w: Vec<f64> = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<_>>()?;
        let b: Vec<f64> = (0..o).map(|_| r.f32().map(f64::from)).collect::<Result<_>>()?;
        let weights = Array2::from_shape_vec((o, i), w).map_err(|e| Error::format(e.to_string()))?;
        layers.push(Layer { weights, bias: Array1::from(b) });
    }
    r.finish()?;
    NetworkParams::from_layers(layers).map_err(|e| Error::format(e.to_string()))
}

pub fn save(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(params))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<NetworkParams> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn quantized_params_round_trip_exactly() {
        let mut net = NetworkParams::new(&[5, 8, 3], &mut seeded(4)).unwrap();
        net.quantize_f32();
        let back = decode(&encode(&net)).unwrap();
        assert_eq!(back, net);
        let x = [0.1, 0.2, -0.3, 0.4, 0.5];
        assert_eq!(net.forward(&x).unwrap(), back.forward(&x).unwrap());
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let net = NetworkParams::zeros(&[2, 2]).unwrap();
        let good = encode(&net);
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic), Err(Error::Format(_))));
        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(matches!(decode(&bad_version), Err(Error::Format(_))));
        assert!(matches!(decode(&good[..good.len() - 1]), Err(Error::Format(_))));
        let mut trailing = good;
        trailing.push(0);
        assert!(matches!(decode(&trailing), Err(Error::Format(_))));
    }
}
