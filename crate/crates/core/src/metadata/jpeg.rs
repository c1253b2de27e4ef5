use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JpegError {
    #[error("not a JPEG file (missing SOI marker)")]
    NotJpeg,
    #[error("malformed segment at offset {0}")]
    MalformedSegment(usize),
    #[error("no Exif segment")]
    NoExifSegment,
}

/// Returns the payload of the first APP1 segment carrying `Exif\0\0`, with
/// that prefix stripped. Only segment headers are read; entropy-coded data
/// after SOS is never scanned.
pub fn scan_jpeg_app1(file: &[u8]) -> Result<&[u8], JpegError> {
    if file.len() < 2 || file[0] != 0xFF || file[1] != 0xD8 {
        return Err(JpegError::NotJpeg);
    }
    let mut pos = 2;
    loop {
        if pos >= file.len() {
            return Err(JpegError::NoExifSegment);
        }
        if file[pos] != 0xFF {
            return Err(JpegError::MalformedSegment(pos));
        }
        let start = pos;
        // fill bytes
        while pos < file.len() && file[pos] == 0xFF {
            pos += 1;
        }
        let Some(&marker) = file.get(pos) else {
            return Err(JpegError::MalformedSegment(start));
        };
        pos += 1;
        match marker {
            0xD9 | 0xDA => return Err(JpegError::NoExifSegment),
            0x01 | 0xD0..=0xD7 => continue,
            _ => {}
        }
        if pos + 2 > file.len() {
            return Err(JpegError::MalformedSegment(start));
        }
        let len = u16::from_be_bytes([file[pos], file[pos + 1]]) as usize;
        if len < 2 || pos + len > file.len() {
            return Err(JpegError::MalformedSegment(start));
        }
        let payload = &file[pos + 2..pos + len];
        if marker == 0xE1 {
            if let Some(exif) = payload.strip_prefix(b"Exif\0\0") {
                return Ok(exif);
            }
        }
        pos += len;
    }
}
