//! NNWF weight files.
//!
//! Layout: `NNWF` magic, `u32` LE version, `u32` LE header length, UTF-8 JSON
//! header, then every parameter block as little-endian `f32` in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, WeightFileError};

use super::spec::ModelSpec;
use super::weights::{ParamBlock, Weights};

pub const MAGIC: [u8; 4] = *b"NNWF";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    params: Vec<ParamEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the blob section.
    offset: usize,
}

pub fn encode_weights(spec: &ModelSpec, weights: &Weights<f32>) -> Result<Vec<u8>> {
    spec.validate()?;
    weights.check(spec)?;
    let mut offset = 0;
    let params = weights
        .blocks
        .iter()
        .map(|b| {
            let e = ParamEntry {
                name: b.name.clone(),
                shape: b.shape.clone(),
                offset,
            };
            offset += b.data.len() * 4;
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header {
        spec: spec.clone(),
        params,
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + offset);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for b in &weights.blocks {
        for x in &b.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, WeightFileError> {
    bytes
        .get(at..at + 4)
        .map(|s| u32::from_le_bytes(s.try_into().unwrap()))
        .ok_or(WeightFileError::Truncated {
            needed: at + 4,
            found: bytes.len(),
        })
}

pub fn decode_weights(bytes: &[u8]) -> Result<(ModelSpec, Weights<f32>)> {
    let magic: [u8; 4] = bytes
        .get(..4)
        .ok_or(WeightFileError::Truncated {
            needed: 4,
            found: bytes.len(),
        })?
        .try_into()
        .unwrap();
    if magic != MAGIC {
        return Err(WeightFileError::BadMagic(magic).into());
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(WeightFileError::UnsupportedVersion(version).into());
    }
    let header_len = read_u32(bytes, 8)? as usize;
    let blob_start = 12 + header_len;
    let header_bytes = bytes.get(12..blob_start).ok_or(WeightFileError::Truncated {
        needed: blob_start,
        found: bytes.len(),
    })?;
    let header: Header =
        serde_json::from_slice(header_bytes).map_err(|e| WeightFileError::Header(e.to_string()))?;
    header
        .spec
        .validate()
        .map_err(|e| WeightFileError::Header(format!("invalid model spec: {e}")))?;
    let decls = header.spec.param_decls();
    if decls.len() != header.params.len() {
        return Err(WeightFileError::Header(format!(
            "header lists {} parameter blocks, model declares {}",
            header.params.len(),
            decls.len()
        ))
        .into());
    }
    let blob = &bytes[blob_start..];
    let mut blocks = Vec::with_capacity(decls.len());
    let mut expected_offset = 0;
    for (d, p) in decls.iter().zip(&header.params) {
        if d.name != p.name || d.shape != p.shape {
            return Err(WeightFileError::ShapeMismatch {
                name: p.name.clone(),
                declared: p.shape.clone(),
                expected: d.shape.clone(),
            }
            .into());
        }
        if p.offset != expected_offset {
            return Err(WeightFileError::Header(format!(
                "parameter `{}` at offset {}, expected {}",
                p.name, p.offset, expected_offset
            ))
            .into());
        }
        let len = d.len() * 4;
        let raw = blob.get(p.offset..p.offset + len).ok_or(WeightFileError::Truncated {
            needed: blob_start + p.offset + len,
            found: bytes.len(),
        })?;
        expected_offset += len;
        blocks.push(ParamBlock {
            name: p.name.clone(),
            shape: p.shape.clone(),
            data: raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        });
    }
    if blob.len() != expected_offset {
        return Err(WeightFileError::Header(format!(
            "{} trailing bytes after the last parameter",
            blob.len() - expected_offset
        ))
        .into());
    }
    let weights = Weights { blocks };
    weights.check(&header.spec)?;
    Ok((header.spec, weights))
}

pub fn save_weights(spec: &ModelSpec, weights: &Weights<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_weights(spec, weights)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(ModelSpec, Weights<f32>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_tiny_x3d;

    fn sample() -> (ModelSpec, Weights<f32>) {
        build_tiny_x3d([4, 16, 16], [2, 2, 3, 3], 5).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (spec, w) = sample();
        let bytes = encode_weights(&spec, &w).unwrap();
        let (spec2, w2) = decode_weights(&bytes).unwrap();
        assert_eq!(spec, spec2);
        for (a, b) in w.blocks.iter().zip(&w2.blocks) {
            assert_eq!(
                a.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn corrupt_magic() {
        let (spec, w) = sample();
        let mut bytes = encode_weights(&spec, &w).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            decode_weights(&bytes),
            Err(Error::WeightFile(WeightFileError::BadMagic(_)))
        ));
    }

    #[test]
    fn wrong_version() {
        let (spec, w) = sample();
        let mut bytes = encode_weights(&spec, &w).unwrap();
        bytes[4] = 9;
        assert!(matches!(
            decode_weights(&bytes),
            Err(Error::WeightFile(WeightFileError::UnsupportedVersion(9)))
        ));
    }

    #[test]
    fn truncated_blob() {
        let (spec, w) = sample();
        let bytes = encode_weights(&spec, &w).unwrap();
        assert!(matches!(
            decode_weights(&bytes[..bytes.len() - 3]),
            Err(Error::WeightFile(WeightFileError::Truncated { .. }))
        ));
        assert!(matches!(
            decode_weights(&bytes[..6]),
            Err(Error::WeightFile(WeightFileError::Truncated { .. }))
        ));
    }

    #[test]
    fn header_length_past_end_of_file() {
        let (spec, w) = sample();
        let mut bytes = encode_weights(&spec, &w).unwrap();
        let claimed = (bytes.len() as u32).to_le_bytes();
        bytes[8..12].copy_from_slice(&claimed);
        assert!(matches!(
            decode_weights(&bytes),
            Err(Error::WeightFile(WeightFileError::Truncated { .. }))
        ));
    }

    #[test]
    fn mismatched_param_shape() {
        let (spec, w) = sample();
        let bytes = encode_weights(&spec, &w).unwrap();
        let hl = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hl]).unwrap();
        header["params"][0]["shape"] = serde_json::json!([2, 1, 3, 3, 2]);
        let new_header = serde_json::to_vec(&header).unwrap();
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(new_header.len() as u32).to_le_bytes());
        out.extend_from_slice(&new_header);
        out.extend_from_slice(&bytes[12 + hl..]);
        assert!(matches!(
            decode_weights(&out),
            Err(Error::WeightFile(WeightFileError::ShapeMismatch { .. }))
        ));
    }
}
