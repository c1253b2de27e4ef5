//! Capture metadata (EXIF/TIFF, sidecar JSON) and PGM image files.
//!
//! File conventions: `scene.pgm` holds the pixels; capture settings come
//! from `scene.exif` (raw TIFF blob) or, failing that, `scene.meta.json`
//! with keys `exposure_time_s`, `iso`, `width`, `height`.

mod exif;
mod jpeg;
mod pgm;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::GrayImage;

pub use exif::{
    parse_exif, write_exif, ByteOrder, CaptureMeta, ExifError, ExifTemplate, TAG_EXIF_IFD, TAG_EXPOSURE_TIME, TAG_ISO,
    TAG_PIXEL_X, TAG_PIXEL_Y,
};
pub use jpeg::{scan_jpeg_app1, JpegError};
pub use pgm::{decode_pgm, encode_pgm, PgmError};

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error(transparent)]
    Exif(#[from] ExifError),
    #[error(transparent)]
    Jpeg(#[from] JpegError),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("no capture metadata for {0} (expected .exif or .meta.json next to it)")]
    NoMetadata(PathBuf),
}

fn read(path: &Path) -> Result<Vec<u8>, MetadataError> {
    std::fs::read(path).map_err(|source| MetadataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_pgm(path: &Path) -> Result<GrayImage, MetadataError> {
    Ok(decode_pgm(&read(path)?)?)
}

pub fn save_pgm(img: &GrayImage, path: &Path) -> Result<(), MetadataError> {
    std::fs::write(path, encode_pgm(img)).map_err(|source| MetadataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// JSON alternative to an EXIF blob for synthetic scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub exposure_time_s: f64,
    pub iso: u32,
    pub width: u32,
    pub height: u32,
}

impl Sidecar {
    fn into_meta(self, path: &Path) -> Result<CaptureMeta, MetadataError> {
        if !(self.exposure_time_s > 0.0) || !self.exposure_time_s.is_finite() || self.iso == 0 {
            return Err(MetadataError::Sidecar {
                path: path.to_path_buf(),
                message: "exposure_time_s and iso must be positive".into(),
            });
        }
        Ok(CaptureMeta {
            exposure_time: self.exposure_time_s,
            iso: self.iso,
            width: self.width,
            height: self.height,
            byte_order: ByteOrder::Little,
        })
    }
}

/// `scene.pgm` -> `scene.<ext>`; `scene.meta.json` style names are built by
/// passing `meta.json`.
pub fn sibling(image: &Path, ext: &str) -> PathBuf {
    image.with_extension(ext)
}

/// Capture metadata for an image file. JPEG files are scanned for their own
/// APP1 segment; otherwise a `.exif` blob is preferred over a `.meta.json`
/// sidecar.
pub fn load_capture_meta(image: &Path) -> Result<CaptureMeta, MetadataError> {
    let is_jpeg = image
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("jpg") || e.eq_ignore_ascii_case("jpeg"));
    if is_jpeg {
        let bytes = read(image)?;
        return Ok(parse_exif(scan_jpeg_app1(&bytes)?)?);
    }
    let blob = sibling(image, "exif");
    if blob.is_file() {
        return Ok(parse_exif(&read(&blob)?)?);
    }
    let side = sibling(image, "meta.json");
    if side.is_file() {
        let text = read(&side)?;
        let s: Sidecar = serde_json::from_slice(&text).map_err(|e| MetadataError::Sidecar {
            path: side.clone(),
            message: e.to_string(),
        })?;
        return s.into_meta(&side);
    }
    Err(MetadataError::NoMetadata(image.to_path_buf()))
}
