//! Binary checkpoint: magic `BGCL`, a version byte, the config text, then
//! the four parameter tensors as shape plus row-major little-endian f64.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::hyperparams::Hyperparams;
use crate::error::{Error, Result};
use crate::propagation::ModelParams;

const MAGIC: &[u8; 4] = b"BGCL";
const VERSION: u8 = 1;

pub fn encode_checkpoint(params: &ModelParams, hp: &Hyperparams) -> Vec<u8> {
    let config = hp.to_config_text();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    for t in params.tensors() {
        out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
        for x in t.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflows".into()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelParams, Hyperparams)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let config_len = r.len()?;
    let config = std::str::from_utf8(r.take(config_len)?).map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
    let hp = Hyperparams::from_config_text(config)?;
    let mut tensors = Vec::with_capacity(4);
    for _ in 0..4 {
        let rows = r.len()?;
        let cols = r.len()?;
        let count = rows.checked_mul(cols).ok_or_else(|| Error::Checkpoint("tensor size overflows".into()))?;
        let raw = r.take(count.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor size overflows".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        tensors.push(Array2::from_shape_vec((rows, cols), data).expect("length checked"));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let tensors: [Array2<f64>; 4] = tensors.try_into().expect("four tensors");
    let params = ModelParams::from_tensors(tensors)?;
    Ok((params, hp))
}

pub fn save_checkpoint(path: &Path, params: &ModelParams, hp: &Hyperparams) -> Result<()> {
    fs::write(path, encode_checkpoint(params, hp)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, Hyperparams)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn round_trip_is_exact() {
        let params = ModelParams::init(4, 6, 3, 2, &mut stream(1, Purpose::Init));
        let mut hp = Hyperparams::default();
        hp.dim = 3;
        hp.hyperedges = 2;
        hp.weights.lambda_d = 0.37;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.bin");
        save_checkpoint(&path, &params, &hp).unwrap();
        let (p, h) = load_checkpoint(&path).unwrap();
        assert_eq!(p, params);
        assert_eq!(h, hp);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let params = ModelParams::zeros(1, 1, 1, 1);
        let bytes = encode_checkpoint(&params, &Hyperparams::default());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_checkpoint(&long).is_err());
        assert!(load_checkpoint(Path::new("/nonexistent/checkpoint.bin")).is_err());
    }
}
