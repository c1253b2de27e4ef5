use thiserror::Error;

use crate::image::GrayImage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmError {
    #[error("not a binary PGM (magic must be P5)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("unsupported PGM maxval {0} (must be 1..=255)")]
    UnsupportedMaxval(u32),
    #[error("PGM data truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}

struct Header<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.buf.get(self.pos) {
            if b == b'#' {
                while self.buf.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.buf.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::BadHeader(format!("expected {what} at byte {start}")))
    }
}

/// Decodes a binary (P5) PGM with maxval up to 255. Values are rescaled to
/// 0..=255 when maxval is smaller.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if !bytes.starts_with(b"P5") {
        return Err(PgmError::BadMagic);
    }
    let mut h = Header { buf: bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(PgmError::BadHeader("missing whitespace after maxval".into())),
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::BadHeader("dimensions overflow".into()))?;
    let data = &bytes[h.pos..];
    if data.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            got: data.len(),
        });
    }
    let scale = 255.0 / maxval as f32;
    let px: Vec<f32> = data[..expected]
        .iter()
        .map(|&v| {
            if maxval == 255 {
                v as f32
            } else {
                (v as f32 * scale).round()
            }
        })
        .collect();
    GrayImage::from_vec(width, height, px).map_err(|e| PgmError::BadHeader(e.to_string()))
}

/// Encodes as P5 with maxval 255, rounding and clamping each pixel.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let (w, h) = img.dimensions();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(img.pixels().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2x2() {
        let img = GrayImage::from_vec(2, 2, vec![0.0, 128.0, 200.0, 255.0]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 128, 200, 255]);
        assert_eq!(decode_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn comments_between_tokens() {
        let mut b = b"P5 # made by hand\n# another\n3 # w\n1\n255\n".to_vec();
        b.extend([1, 2, 3]);
        let img = decode_pgm(&b).unwrap();
        assert_eq!(img.pixels(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_wide_maxval_and_bad_magic() {
        let b = b"P5\n1 1\n65535\n\0\0";
        assert_eq!(decode_pgm(b), Err(PgmError::UnsupportedMaxval(65535)));
        assert_eq!(decode_pgm(b"P2\n1 1\n255\n0"), Err(PgmError::BadMagic));
        assert!(matches!(
            decode_pgm(b"P5\n4 4\n255\n\0"),
            Err(PgmError::Truncated { .. })
        ));
    }
}
