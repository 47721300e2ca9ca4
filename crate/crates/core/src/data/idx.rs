//! IDX files as published for MNIST (big-endian header), optionally gzipped.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{io_err, resize_to_28, DataError, DatasetSpec, LabeledDataset};
use crate::nn::{Matrix, INPUT_DIM};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    let raw = std::fs::read(path).map_err(io_err(path))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(io_err(path))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, DataError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| DataError::Format("truncated IDX header".into()))
}

/// Decodes an image file into `(count, rows, cols, pixels)`.
pub fn read_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8]), DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(DataError::Format(format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| DataError::Format("IDX dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() != need {
        return Err(DataError::Format(format!(
            "image payload has {} bytes, header implies {need}",
            body.len()
        )));
    }
    Ok((n, rows, cols, body))
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<&[u8], DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(DataError::Format(format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(DataError::Format(format!(
            "label payload has {} bytes, header says {n}",
            body.len()
        )));
    }
    Ok(body)
}

/// Loads an image/label file pair. Pixels are scaled by 1/255; images that
/// are not 28×28 are area-resized.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset, DataError> {
    let img_bytes = read_file(images_path.as_ref())?;
    let lbl_bytes = read_file(labels_path.as_ref())?;
    let (n, rows, cols, pixels) = read_idx_images(&img_bytes)?;
    let labels = read_idx_labels(&lbl_bytes)?;
    if labels.len() != n {
        return Err(DataError::Format(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }
    if n == 0 || rows == 0 || cols == 0 {
        return Err(DataError::EmptyInput);
    }
    let mut data = Vec::with_capacity(n * INPUT_DIM);
    for img in pixels.chunks_exact(rows * cols) {
        let scaled: Vec<f64> = img.iter().map(|&b| f64::from(b) / 255.0).collect();
        if rows * cols == INPUT_DIM && rows == 28 {
            data.extend_from_slice(&scaled);
        } else {
            data.extend(resize_to_28(&scaled, rows, cols)?);
        }
    }
    let y: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let classes = y.iter().max().map_or(0, |m| m + 1).max(1);
    let name = images_path
        .as_ref()
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    let spec = DatasetSpec {
        name,
        source: super::DatasetSource::Idx {
            images: images_path.as_ref().to_path_buf(),
            labels: labels_path.as_ref().to_path_buf(),
        },
        num_classes: classes,
    };
    let x = Matrix::new(n, INPUT_DIM, data).map_err(|e| DataError::Format(e.to_string()))?;
    LabeledDataset::new(x, y, spec)
}
