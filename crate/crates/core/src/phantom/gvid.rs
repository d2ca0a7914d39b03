//! GVID clip files: `GVID`, u32 version, u32 t/h/w, then f32 samples, all
//! little-endian.

use std::path::Path;

use crate::error::{ClipFileError, Error, Result};
use crate::tensor::VideoClip;

const MAGIC: &[u8; 4] = b"GVID";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn encode_clip(clip: &VideoClip) -> Vec<u8> {
    let [t, h, w] = clip.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * clip.data().len());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, t as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in clip.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_clip(bytes: &[u8]) -> Result<VideoClip> {
    if bytes.len() < 4 {
        return Err(ClipFileError::Truncated {
            needed: HEADER_LEN,
            found: bytes.len(),
        }
        .into());
    }
    if &bytes[..4] != MAGIC {
        return Err(ClipFileError::BadMagic(bytes[..4].try_into().unwrap()).into());
    }
    if bytes.len() < HEADER_LEN {
        return Err(ClipFileError::Truncated {
            needed: HEADER_LEN,
            found: bytes.len(),
        }
        .into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != VERSION {
        return Err(ClipFileError::UnsupportedVersion(version).into());
    }
    let dims = [word(1) as usize, word(2) as usize, word(3) as usize];
    let needed = dims
        .iter()
        .try_fold(4usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(ClipFileError::InvalidData("dimensions overflow".into()))?;
    if bytes.len() != needed {
        return Err(ClipFileError::Truncated {
            needed,
            found: bytes.len(),
        }
        .into());
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    VideoClip::from_frames(dims, data).map_err(|e| ClipFileError::InvalidData(e.to_string()).into())
}

pub fn write_clip(path: &Path, clip: &VideoClip) -> Result<()> {
    std::fs::write(path, encode_clip(clip)).map_err(|e| Error::io(path, e))
}

pub fn read_clip(path: &Path) -> Result<VideoClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_clip(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VideoClip {
        let data = (0..2 * 3 * 4).map(|i| i as f32 / 24.0).collect();
        VideoClip::from_frames([2, 3, 4], data).unwrap()
    }

    #[test]
    fn round_trip() {
        let clip = sample();
        let back = decode_clip(&encode_clip(&clip)).unwrap();
        assert_eq!(back.data(), clip.data());
        assert_eq!(back.dims(), [2, 3, 4]);
    }

    #[test]
    fn corrupt_inputs() {
        let mut b = encode_clip(&sample());
        assert!(matches!(decode_clip(&b[..b.len() - 1]), Err(Error::ClipFile(ClipFileError::Truncated { .. }))));
        b[4] = 7;
        assert!(matches!(decode_clip(&b), Err(Error::ClipFile(ClipFileError::UnsupportedVersion(7)))));
        b[0] = b'X';
        assert!(matches!(decode_clip(&b), Err(Error::ClipFile(ClipFileError::BadMagic(_)))));
    }

    #[test]
    fn out_of_range_sample_is_invalid() {
        let mut b = encode_clip(&sample());
        let n = b.len();
        b[n - 4..].copy_from_slice(&2.5f32.to_le_bytes());
        assert!(matches!(decode_clip(&b), Err(Error::ClipFile(ClipFileError::InvalidData(_)))));
    }
}
