//! Dataset ingestion and preprocessing.
//!
//! Every dataset ends up as rows of 784 values in [0, 1]: IDX images are
//! scaled by 1/255 (and area-resized when not 28×28), synthetic vectors of
//! arbitrary length go through 1D adaptive average pooling.

mod idx;
mod preprocess;
mod spec;
mod split;
mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::nn::{Matrix, INPUT_DIM};

pub use idx::{load_idx, read_idx_images, read_idx_labels};
pub use preprocess::{adaptive_avg_pool_1d, adaptive_avg_pool_1d_to, resize_to_28};
pub use spec::{DatasetSource, DatasetSpec, NativeShape, SynthParams};
pub use split::{split, SplitAssignment};
pub use synth::synth_dataset;

/// Environment variable naming the dataset cache directory.
pub const DATA_DIR_ENV: &str = "EMBED_ROUTER_DATA_DIR";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("format error: {0}")]
    Format(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("class {class} has {count} samples; stratified splitting needs at least 4")]
    Stratification { class: usize, count: usize },
    #[error("{what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Directory holding dataset files: `$EMBED_ROUTER_DATA_DIR`, else `./data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Feature rows with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    x: Matrix,
    y: Vec<usize>,
    spec: DatasetSpec,
}

impl LabeledDataset {
    pub fn new(x: Matrix, y: Vec<usize>, spec: DatasetSpec) -> Result<Self, DataError> {
        if x.cols() != INPUT_DIM {
            return Err(DataError::Shape {
                what: "feature width",
                expected: INPUT_DIM,
                actual: x.cols(),
            });
        }
        if x.rows() != y.len() {
            return Err(DataError::Shape {
                what: "label count",
                expected: x.rows(),
                actual: y.len(),
            });
        }
        if let Some(v) = x.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::Param(format!("feature value {v} outside [0, 1]")));
        }
        if let Some(&l) = y.iter().find(|&&l| l >= spec.num_classes) {
            return Err(DataError::Param(format!(
                "label {l} not below class count {}",
                spec.num_classes
            )));
        }
        Ok(LabeledDataset { x, y, spec })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn spec(&self) -> &DatasetSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.spec.num_classes];
        for &l in &self.y {
            counts[l] += 1;
        }
        counts
    }

    /// Rows `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            spec: self.spec.clone(),
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}
