use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TAG_EXIF_IFD: u16 = 0x8769;
pub const TAG_EXPOSURE_TIME: u16 = 0x829A;
pub const TAG_ISO: u16 = 0x8827;
pub const TAG_PIXEL_X: u16 = 0xA002;
pub const TAG_PIXEL_Y: u16 = 0xA003;

const EXIF_PREFIX: &[u8] = b"Exif\0\0";
const MAX_IFDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExifError {
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("offset out of bounds: {offset} + {size} > {len}")]
    OutOfBounds { offset: u64, size: u64, len: usize },
    #[error("missing required tag {name} (0x{tag:04X})")]
    MissingTag { name: &'static str, tag: u16 },
    #[error("tag 0x{tag:04X} has unsupported type {field_type} or count {count}")]
    BadType { tag: u16, field_type: u16, count: u32 },
    #[error("tag 0x{tag:04X}: {message}")]
    InvalidValue { tag: u16, message: String },
    #[error("IFD chain revisits offset {0}")]
    IfdLoop(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByteOrder {
    Little,
    Big,
}

/// Capture settings recovered from a TIFF/EXIF blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMeta {
    pub exposure_time: f64,
    pub iso: u32,
    pub width: u32,
    pub height: u32,
    pub byte_order: ByteOrder,
}

impl CaptureMeta {
    /// Equality of the capture values, ignoring the blob's byte order.
    pub fn same_capture(&self, other: &CaptureMeta) -> bool {
        self.exposure_time == other.exposure_time
            && self.iso == other.iso
            && self.width == other.width
            && self.height == other.height
    }

    /// Pixel count used as the resolution feature.
    pub fn resolution(&self) -> f64 {
        self.width as f64 * self.height as f64
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    order: ByteOrder,
}

impl Reader<'_> {
    fn bytes(&self, offset: u64, size: u64) -> Result<&[u8], ExifError> {
        let end = offset.checked_add(size);
        match end {
            Some(end) if end <= self.buf.len() as u64 => Ok(&self.buf[offset as usize..end as usize]),
            _ => Err(ExifError::OutOfBounds {
                offset,
                size,
                len: self.buf.len(),
            }),
        }
    }

    fn u16(&self, offset: u64) -> Result<u16, ExifError> {
        let b = self.bytes(offset, 2)?;
        let a = [b[0], b[1]];
        Ok(match self.order {
            ByteOrder::Little => u16::from_le_bytes(a),
            ByteOrder::Big => u16::from_be_bytes(a),
        })
    }

    fn u32(&self, offset: u64) -> Result<u32, ExifError> {
        let b = self.bytes(offset, 4)?;
        let a = [b[0], b[1], b[2], b[3]];
        Ok(match self.order {
            ByteOrder::Little => u32::from_le_bytes(a),
            ByteOrder::Big => u32::from_be_bytes(a),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    tag: u16,
    field_type: u16,
    count: u32,
    /// Offset of the 4-byte value/offset field.
    field: u64,
}

fn type_size(t: u16) -> Option<u64> {
    match t {
        1 | 2 | 6 | 7 => Some(1),
        3 | 8 => Some(2),
        4 | 9 | 11 => Some(4),
        5 | 10 | 12 => Some(8),
        _ => None,
    }
}

impl Entry {
    /// Offset of the value data, inline or pointed to.
    fn data_offset(&self, r: &Reader) -> Result<u64, ExifError> {
        let size = type_size(self.field_type).ok_or(ExifError::BadType {
            tag: self.tag,
            field_type: self.field_type,
            count: self.count,
        })?;
        let total = size * self.count as u64;
        if total <= 4 {
            Ok(self.field)
        } else {
            let off = r.u32(self.field)? as u64;
            r.bytes(off, total)?;
            Ok(off)
        }
    }

    fn unsigned(&self, r: &Reader) -> Result<u32, ExifError> {
        if self.count != 1 {
            return Err(self.bad_type());
        }
        match self.field_type {
            3 => Ok(r.u16(self.field)? as u32),
            4 => r.u32(self.field),
            _ => Err(self.bad_type()),
        }
    }

    fn rational(&self, r: &Reader) -> Result<(u32, u32), ExifError> {
        if self.field_type != 5 || self.count != 1 {
            return Err(self.bad_type());
        }
        let off = self.data_offset(r)?;
        Ok((r.u32(off)?, r.u32(off + 4)?))
    }

    fn bad_type(&self) -> ExifError {
        ExifError::BadType {
            tag: self.tag,
            field_type: self.field_type,
            count: self.count,
        }
    }
}

fn read_ifd(r: &Reader, offset: u64) -> Result<Vec<Entry>, ExifError> {
    let n = r.u16(offset)? as u64;
    r.bytes(offset + 2, n * 12 + 4)?;
    let mut out = Vec::with_capacity(n as usize);
    for k in 0..n {
        let e = offset + 2 + 12 * k;
        out.push(Entry {
            tag: r.u16(e)?,
            field_type: r.u16(e + 2)?,
            count: r.u32(e + 4)?,
            field: e + 8,
        });
    }
    Ok(out)
}

/// Parses a TIFF-structured EXIF blob (optionally prefixed `Exif\0\0`).
///
/// Walks IFD0 and the Exif sub-IFD; tags in the sub-IFD win over IFD0.
/// Every offset is bounds-checked, so arbitrary input yields a value or an
/// error.
pub fn parse_exif(blob: &[u8]) -> Result<CaptureMeta, ExifError> {
    let buf = blob.strip_prefix(EXIF_PREFIX).unwrap_or(blob);
    if buf.len() < 8 {
        return Err(ExifError::BadHeader(format!("blob has {} bytes", buf.len())));
    }
    let order = match &buf[..2] {
        b"II" => ByteOrder::Little,
        b"MM" => ByteOrder::Big,
        _ => return Err(ExifError::BadHeader("byte order mark is not II or MM".into())),
    };
    let r = Reader { buf, order };
    if r.u16(2)? != 42 {
        return Err(ExifError::BadHeader("TIFF magic is not 42".into()));
    }
    let ifd0 = r.u32(4)?;

    let mut entries = read_ifd(&r, ifd0 as u64)?;
    let mut visited = vec![ifd0];
    let mut pointer = entries.iter().find(|e| e.tag == TAG_EXIF_IFD).copied();
    while let Some(p) = pointer.take() {
        let off = p.unsigned(&r)?;
        if visited.contains(&off) {
            return Err(ExifError::IfdLoop(off));
        }
        if visited.len() >= MAX_IFDS {
            break;
        }
        visited.push(off);
        let sub = read_ifd(&r, off as u64)?;
        pointer = sub.iter().find(|e| e.tag == TAG_EXIF_IFD).copied();
        // sub-IFD entries go first so they take precedence
        entries.splice(0..0, sub);
    }
    let find = |tag: u16, name: &'static str| {
        entries
            .iter()
            .find(|e| e.tag == tag)
            .copied()
            .ok_or(ExifError::MissingTag { name, tag })
    };

    let (num, den) = find(TAG_EXPOSURE_TIME, "ExposureTime")?.rational(&r)?;
    if num == 0 || den == 0 {
        return Err(ExifError::InvalidValue {
            tag: TAG_EXPOSURE_TIME,
            message: format!("exposure {num}/{den} is not positive"),
        });
    }
    let iso = find(TAG_ISO, "ISOSpeedRatings")?.unsigned(&r)?;
    if iso == 0 {
        return Err(ExifError::InvalidValue {
            tag: TAG_ISO,
            message: "ISO is zero".into(),
        });
    }
    let width = find(TAG_PIXEL_X, "PixelXDimension")?.unsigned(&r)?;
    let height = find(TAG_PIXEL_Y, "PixelYDimension")?.unsigned(&r)?;
    Ok(CaptureMeta {
        exposure_time: num as f64 / den as f64,
        iso,
        width,
        height,
        byte_order: order,
    })
}

/// Values written by [`write_exif`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExifTemplate {
    pub exposure: (u32, u32),
    pub iso: u16,
    pub width: u32,
    pub height: u32,
}

/// Writes the fixed synthetic layout: TIFF header, IFD0 holding only the
/// Exif pointer, and an Exif IFD with exposure, ISO and pixel dimensions.
pub fn write_exif(t: &ExifTemplate, order: ByteOrder) -> Vec<u8> {
    let mut out = Vec::with_capacity(96);
    let put16 = |out: &mut Vec<u8>, v: u16| match order {
        ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
        ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
    };
    let put32 = |out: &mut Vec<u8>, v: u32| match order {
        ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
        ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
    };
    out.extend_from_slice(match order {
        ByteOrder::Little => b"II",
        ByteOrder::Big => b"MM",
    });
    put16(&mut out, 42);
    put32(&mut out, 8);

    // IFD0 at 8: one entry
    let exif_ifd = 8 + 2 + 12 + 4;
    put16(&mut out, 1);
    put16(&mut out, TAG_EXIF_IFD);
    put16(&mut out, 4);
    put32(&mut out, 1);
    put32(&mut out, exif_ifd);
    put32(&mut out, 0);

    // Exif IFD: four entries, then the rational
    let rational_at = exif_ifd + 2 + 4 * 12 + 4;
    put16(&mut out, 4);
    put16(&mut out, TAG_EXPOSURE_TIME);
    put16(&mut out, 5);
    put32(&mut out, 1);
    put32(&mut out, rational_at);
    put16(&mut out, TAG_ISO);
    put16(&mut out, 3);
    put32(&mut out, 1);
    put16(&mut out, t.iso);
    put16(&mut out, 0);
    for (tag, v) in [(TAG_PIXEL_X, t.width), (TAG_PIXEL_Y, t.height)] {
        put16(&mut out, tag);
        put16(&mut out, 4);
        put32(&mut out, 1);
        put32(&mut out, v);
    }
    put32(&mut out, 0);
    put32(&mut out, t.exposure.0);
    put32(&mut out, t.exposure.1);
    out
}
