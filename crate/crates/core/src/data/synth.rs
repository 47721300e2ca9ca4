use super::{adaptive_avg_pool_1d, resize_to_28, DataError, DatasetSource, DatasetSpec, LabeledDataset, NativeShape};
use crate::nn::{Matrix, Rng, INPUT_DIM};

/// Gaussian clusters around uniform random prototypes, optionally sparse.
///
/// All class prototypes are drawn first, then the samples of class 0, 1, …;
/// each sample is `clamp(prototype + sigma * N(0, 1), 0, 1)` in its native
/// shape, then mapped to 784 features.
pub fn synth_dataset(spec: &DatasetSpec, seed: u64) -> Result<LabeledDataset, DataError> {
    let DatasetSource::Synthetic(p) = &spec.source else {
        return Err(DataError::Param(format!("{} is not a synthetic dataset", spec.name)));
    };
    spec.validate()?;
    let native = p.shape.len();
    let mut rng = Rng::new(seed);
    let prototypes: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| {
            (0..native)
                .map(|_| {
                    if p.density < 1.0 && rng.next_f64() >= p.density {
                        0.0
                    } else {
                        rng.uniform(p.proto_min, p.proto_max)
                    }
                })
                .collect()
        })
        .collect();
    let n = spec.num_classes * p.samples_per_class;
    let mut data = Vec::with_capacity(n * INPUT_DIM);
    let mut labels = Vec::with_capacity(n);
    for (class, proto) in prototypes.iter().enumerate() {
        for _ in 0..p.samples_per_class {
            let raw: Vec<f64> = if p.sigma == 0.0 {
                proto.clone()
            } else {
                proto
                    .iter()
                    .map(|v| (v + p.sigma * rng.normal()).clamp(0.0, 1.0))
                    .collect()
            };
            let row = match p.shape {
                NativeShape::Vector(_) => adaptive_avg_pool_1d(&raw)?,
                NativeShape::Image { height, width } => resize_to_28(&raw, height, width)?,
            };
            data.extend(row);
            labels.push(class);
        }
    }
    let x = Matrix::new(n, INPUT_DIM, data).map_err(|e| DataError::Param(e.to_string()))?;
    LabeledDataset::new(x, labels, spec.clone())
}
