//! Raw level-set snapshots: a 16-byte header (`LSF1`, then width, height
//! and step as little-endian `u32`) followed by `f32` samples in row order.

use std::path::Path;

use crate::energies::ImageGrid;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::levelset::LevelSetField;

use super::pgm::write_pgm;

pub const LSF_MAGIC: &[u8; 4] = b"LSF1";
const HEADER: usize = 16;
/// Preview clamp, in pixels.
const PREVIEW_RANGE: f64 = 10.0;

pub fn encode_lsf(field: &LevelSetField, step: usize) -> Vec<u8> {
    let psi = &field.psi;
    let mut out = Vec::with_capacity(HEADER + 4 * psi.len());
    out.extend_from_slice(LSF_MAGIC);
    for v in [psi.width, psi.height, step] {
        out.extend((v as u32).to_le_bytes());
    }
    for &v in &psi.data {
        out.extend((v as f32).to_le_bytes());
    }
    out
}

/// Decodes a snapshot into the field and its step.
pub fn decode_lsf(bytes: &[u8], path: &Path) -> Result<(LevelSetField, usize)> {
    let parse = |message: &str| Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    };
    if bytes.len() < HEADER {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: bytes.len(),
        });
    }
    if &bytes[..4] != LSF_MAGIC {
        return Err(parse("missing LSF1 magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (w, h, step) = (word(1), word(2), word(3));
    let end = HEADER + 4 * w * h;
    if bytes.len() < end {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: bytes.len(),
        });
    }
    let data = bytes[HEADER..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((LevelSetField { psi: GridField::from_vec(w, h, data)? }, step))
}

pub fn write_lsf(field: &LevelSetField, step: usize, path: &Path) -> Result<()> {
    std::fs::write(path, encode_lsf(field, step))?;
    Ok(())
}

pub fn read_lsf(path: &Path) -> Result<(LevelSetField, usize)> {
    decode_lsf(&std::fs::read(path)?, path)
}

/// `psi` clamped to `[-10, 10]` and mapped linearly onto `[0, 1]`.
pub fn lsf_preview(field: &LevelSetField) -> Result<ImageGrid> {
    let psi = &field.psi;
    ImageGrid::new(
        psi.width,
        psi.height,
        psi.data
            .iter()
            .map(|v| (v.clamp(-PREVIEW_RANGE, PREVIEW_RANGE) + PREVIEW_RANGE) / (2.0 * PREVIEW_RANGE))
            .collect(),
    )
}

pub fn write_lsf_preview(field: &LevelSetField, path: &Path) -> Result<()> {
    write_pgm(&lsf_preview(field)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{init_signed_distance, Shape};

    fn field() -> LevelSetField {
        init_signed_distance(
            &Shape::Circle {
                center: [20.0, 15.0],
                radius: 7.5,
            },
            40,
            32,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_at_f32_precision() {
        let f = field();
        let bytes = encode_lsf(&f, 123);
        assert_eq!(bytes.len(), 16 + 4 * 40 * 32);
        assert_eq!(&bytes[..4], b"LSF1");
        let (g, step) = decode_lsf(&bytes, Path::new("x")).unwrap();
        assert_eq!(step, 123);
        for (a, b) in f.psi.data.iter().zip(&g.psi.data) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = Path::new("x");
        let mut bytes = encode_lsf(&field(), 0);
        assert!(matches!(decode_lsf(&bytes[..10], p), Err(Error::Truncated { offset: 10, .. })));
        let n = bytes.len();
        assert!(matches!(decode_lsf(&bytes[..n - 1], p), Err(Error::Truncated { .. })));
        bytes[0] = b'X';
        assert!(matches!(decode_lsf(&bytes, p), Err(Error::Parse { .. })));
    }

    #[test]
    fn preview_clamps() {
        let img = lsf_preview(&field()).unwrap();
        // centre is 7.5 inside, corners far outside
        assert!((img.get(20, 15) - 0.125).abs() < 1e-12);
        assert_eq!(img.get(0, 0), 1.0);
    }
}
