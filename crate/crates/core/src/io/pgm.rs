//! Portable graymap images, ASCII (`P2`) and binary (`P5`).

use std::path::Path;

use crate::energies::ImageGrid;
use crate::error::{Error, Result};

/// Largest `maxval` the format allows.
pub const PGM_MAX: u32 = 65535;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&[u8]> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Option<u32> {
        std::str::from_utf8(self.token()?).ok()?.parse().ok()
    }
}

/// Decodes PGM bytes; intensities are scaled by `maxval` into `[0, 1]`.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<ImageGrid> {
    let parse = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match cur.token() {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(parse("not a PGM file (expected magic P2 or P5)".into())),
    };
    let mut header = [0u32; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        *slot = cur
            .number()
            .ok_or_else(|| parse(format!("malformed header: bad {name} near byte {}", cur.pos)))?;
    }
    let [w, h, maxval] = header;
    if w == 0 || h == 0 {
        return Err(parse(format!("empty image {w}x{h}")));
    }
    if maxval == 0 || maxval > PGM_MAX {
        return Err(parse(format!("maxval {maxval} outside 1..={PGM_MAX}")));
    }
    let n = w as usize * h as usize;
    let mut values = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = cur.pos + 1;
        let width = if maxval < 256 { 1 } else { 2 };
        let end = start + n * width;
        if end > bytes.len() {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                offset: bytes.len(),
            });
        }
        for chunk in bytes[start..end].chunks(width) {
            let v = if width == 1 {
                chunk[0] as u32
            } else {
                u16::from_be_bytes([chunk[0], chunk[1]]) as u32
            };
            values.push(v);
        }
    } else {
        for _ in 0..n {
            cur.skip_space();
            if cur.pos >= bytes.len() {
                return Err(Error::Truncated {
                    path: path.to_path_buf(),
                    offset: cur.pos,
                });
            }
            let at = cur.pos;
            let v = cur
                .number()
                .ok_or_else(|| parse(format!("bad sample at byte offset {at}")))?;
            values.push(v);
        }
    }
    if let Some(&v) = values.iter().find(|&&v| v > maxval) {
        return Err(parse(format!("sample {v} exceeds maxval {maxval}")));
    }
    let scale = maxval as f64;
    ImageGrid::new(
        w as usize,
        h as usize,
        values.into_iter().map(|v| v as f64 / scale).collect(),
    )
}

pub fn read_pgm(path: &Path) -> Result<ImageGrid> {
    let bytes = std::fs::read(path)?;
    decode_pgm(&bytes, path)
}

/// 8-bit quantisation of an intensity in `[0, 1]`.
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes as binary 8-bit PGM.
pub fn encode_pgm(image: &ImageGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.as_field().data.iter().map(|&v| to_u8(v)));
    out
}

/// Encodes as ASCII PGM with `maxval` 255.
pub fn encode_pgm_ascii(image: &ImageGrid) -> String {
    let mut out = format!("P2\n{} {}\n255\n", image.width(), image.height());
    for y in 0..image.height() {
        let row: Vec<String> = (0..image.width()).map(|x| to_u8(image.get(x, y)).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_pgm(image: &ImageGrid, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm(image))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem.pgm")
    }

    fn bytes_image(w: usize, h: usize, data: &[u8]) -> ImageGrid {
        ImageGrid::new(w, h, data.iter().map(|&b| b as f64 / 255.0).collect()).unwrap()
    }

    #[test]
    fn ascii_and_binary_agree() {
        let data: Vec<u8> = (0..20 * 17).map(|i| (i * 7 % 256) as u8).collect();
        let img = bytes_image(20, 17, &data);
        let a = decode_pgm(encode_pgm_ascii(&img).as_bytes(), p()).unwrap();
        let b = decode_pgm(&encode_pgm(&img), p()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, img);
    }

    #[test]
    fn sixteen_bit_and_comments() {
        let mut bytes = b"P5 # made by hand\n16 16\n# maxval next\n65535\n".to_vec();
        for i in 0..256u16 {
            bytes.extend((i * 257).to_be_bytes());
        }
        let img = decode_pgm(&bytes, p()).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(15, 15), 1.0);
        assert!((img.get(1, 0) - 257.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_payload_names_offset() {
        let img = bytes_image(16, 16, &[9; 256]);
        let mut bytes = encode_pgm(&img);
        let header = bytes.len() - 256;
        bytes.truncate(header + 100);
        match decode_pgm(&bytes, p()) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, header + 100),
            other => panic!("expected truncation, got {other:?}"),
        }
        let err = decode_pgm(&bytes, p()).unwrap_err().to_string();
        assert!(err.contains(&format!("offset {}", header + 100)), "{err}");
        let ascii = "P2\n16 16\n255\n1 2 3\n";
        assert!(matches!(decode_pgm(ascii.as_bytes(), p()), Err(Error::Truncated { offset: 19, .. })));
    }

    #[test]
    fn malformed_headers() {
        for bad in [&b"P6\n16 16\n255\n"[..], b"P5\n16\n", b"P5\n16 16\n70000\n", b"P5\n0 16\n255\n"] {
            assert!(matches!(decode_pgm(bad, p()), Err(Error::Parse { .. })), "{:?}", String::from_utf8_lossy(bad));
        }
        assert!(decode_pgm(b"P2\n16 16\n10\n11", p()).is_err());
    }

    proptest! {
        #[test]
        fn eight_bit_round_trip(w in 16usize..40, h in 16usize..40, seed in any::<u64>()) {
            let data: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 56) as u8).collect();
            let img = bytes_image(w, h, &data);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("x.pgm");
            write_pgm(&img, &path).unwrap();
            prop_assert_eq!(read_pgm(&path).unwrap(), img);
        }
    }
}
