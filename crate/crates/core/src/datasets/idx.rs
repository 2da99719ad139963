use std::io::Write;
use std::path::Path;

use super::{read_maybe_gz, DatasetError, Result};
use crate::matrix::SampleMatrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| DatasetError::Length(format!("{what}: header truncated")))
}

/// Parses an IDX image file into one row of `rows × cols` pixels per image, scaled by 1/255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<SampleMatrix> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DatasetError::Format(format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let dim = rows * cols;
    let body = &bytes[16..];
    if body.len() != count * dim {
        return Err(DatasetError::Length(format!(
            "images: header promises {count}×{rows}×{cols} bytes, file holds {}",
            body.len()
        )));
    }
    Ok(SampleMatrix::from_vec(count, dim, body.iter().map(|&b| b as f64 / 255.0).collect()))
}

/// Parses an IDX label file; every label must be a digit class 0–9.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DatasetError::Format(format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(DatasetError::Length(format!("labels: header promises {count}, file holds {}", body.len())));
    }
    super::check_labels(body)?;
    Ok(body.to_vec())
}

/// Loads an image/label file pair; either file may be gzip-compressed.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<(SampleMatrix, Vec<u8>)> {
    let images = parse_idx_images(&read_maybe_gz(images_path)?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path)?)?;
    if images.rows() != labels.len() {
        return Err(DatasetError::Mismatch(format!(
            "{} images but {} labels",
            images.rows(),
            labels.len()
        )));
    }
    Ok((images, labels))
}

/// Writes raw image bytes in IDX layout.
pub fn write_idx_images<W: Write>(mut out: W, count: usize, rows: usize, cols: usize, pixels: &[u8]) -> std::io::Result<()> {
    assert_eq!(pixels.len(), count * rows * cols);
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.write_all(&v.to_be_bytes())?;
    }
    out.write_all(pixels)
}

pub fn write_idx_labels<W: Write>(mut out: W, labels: &[u8]) -> std::io::Result<()> {
    out.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)
}
