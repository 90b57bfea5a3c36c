//! Loader for the big-endian IDX image/label format.
//!
//! Images: magic 0x00000803, then u32 count, u32 rows, u32 cols, then
//! row-major u8 pixels. Labels: magic 0x00000801, then u32 count and u8
//! labels. Pixels are scaled to [0, 1]; an optional (mean, std) pair
//! standardizes them afterwards.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fedsim::data::Dataset;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(reader: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_be_bytes(buf))
}

fn load_images(path: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = read_u32_be(&mut reader)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::IdxFormat(format!(
            "bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(&mut reader)? as usize;
    let rows = read_u32_be(&mut reader)? as usize;
    let cols = read_u32_be(&mut reader)? as usize;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(Error::IdxFormat("empty image file".into()));
    }
    let mut pixels = vec![0u8; count * rows * cols];
    reader.read_exact(&mut pixels).map_err(|e| {
        Error::IdxFormat(format!("truncated image data: {e}"))
    })?;
    Ok((pixels, count, rows, cols))
}

fn load_labels(path: &Path) -> Result<Vec<u8>> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = read_u32_be(&mut reader)?;
    if magic != LABEL_MAGIC {
        return Err(Error::IdxFormat(format!(
            "bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(&mut reader)? as usize;
    let mut labels = vec![0u8; count];
    reader.read_exact(&mut labels).map_err(|e| {
        Error::IdxFormat(format!("truncated label data: {e}"))
    })?;
    Ok(labels)
}

/// Loads paired IDX image and label files into a dataset.
pub fn load_idx_dataset(
    images: &Path,
    labels: &Path,
    normalize: Option<(f64, f64)>,
) -> Result<Dataset> {
    let (pixels, count, rows, cols) = load_images(images)?;
    let raw_labels = load_labels(labels)?;
    if raw_labels.len() != count {
        return Err(Error::IdxFormat(format!(
            "{count} images but {} labels",
            raw_labels.len()
        )));
    }
    if let Some((_, std)) = normalize {
        if !(std > 0.0) {
            return Err(Error::InvalidParameter {
                name: "normalize_std",
                reason: "must be positive".into(),
            });
        }
    }
    let features: Vec<f64> = pixels
        .iter()
        .map(|&p| {
            let scaled = p as f64 / 255.0;
            match normalize {
                Some((mean, std)) => (scaled - mean) / std,
                None => scaled,
            }
        })
        .collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut dataset = Dataset::new(features, labels, rows * cols, classes.max(2))?;
    dataset.image_dims = Some((rows, cols));
    Ok(dataset)
}
