//! Dataset descriptions, including the `key = value` file format for
//! synthetic datasets:
//!
//! ```text
//! # three Gaussian blobs around random prototypes, pooled from 561 features
//! name = blobs
//! source = synthetic
//! classes = 3
//! samples_per_class = 400
//! sigma = 0.1
//! dims = 561
//! # optional: proto_min, proto_max, density, seed
//! ```
//!
//! IDX-backed datasets use `source = idx` with `images` and `labels` paths
//! (relative paths resolve against the data directory); `source = mnist` is
//! shorthand for the 10k MNIST files under `mnist/`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{idx, io_err, synth, DataError, LabeledDataset};

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub source: DatasetSource,
    pub num_classes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Idx { images: PathBuf, labels: PathBuf },
    Synthetic(SynthParams),
}

/// Native layout of generated samples before mapping to 784 features.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NativeShape {
    /// Flat vector, adaptively pooled.
    Vector(usize),
    /// Grayscale image, area-resized to 28×28.
    Image { height: usize, width: usize },
}

impl NativeShape {
    pub fn len(&self) -> usize {
        match *self {
            NativeShape::Vector(n) => n,
            NativeShape::Image { height, width } => height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub samples_per_class: usize,
    /// Standard deviation of the per-coordinate Gaussian noise.
    pub sigma: f64,
    pub shape: NativeShape,
    /// Prototype coordinates are drawn uniformly from `[proto_min, proto_max]`.
    pub proto_min: f64,
    pub proto_max: f64,
    /// Probability that a prototype coordinate is drawn at all; the rest
    /// are 0. Values below 1 give sparse, stroke-like prototypes.
    pub density: f64,
    /// Fixed generator seed; when absent the caller's seed is used.
    pub seed: Option<u64>,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            samples_per_class: 100,
            sigma: 0.1,
            shape: NativeShape::Vector(784),
            proto_min: 0.0,
            proto_max: 1.0,
            density: 1.0,
            seed: None,
        }
    }
}

pub const MNIST_IMAGES: &str = "mnist/t10k-images-idx3-ubyte.gz";
pub const MNIST_LABELS: &str = "mnist/t10k-labels-idx1-ubyte.gz";

impl DatasetSpec {
    /// The 10k-sample MNIST corpus under the data directory.
    pub fn mnist() -> Self {
        DatasetSpec {
            name: "mnist".into(),
            source: DatasetSource::Idx {
                images: MNIST_IMAGES.into(),
                labels: MNIST_LABELS.into(),
            },
            num_classes: 10,
        }
    }

    pub fn synthetic(name: &str, num_classes: usize, params: SynthParams) -> Self {
        DatasetSpec {
            name: name.into(),
            source: DatasetSource::Synthetic(params),
            num_classes,
        }
    }

    /// Native dimensionality of one sample.
    pub fn native_dims(&self) -> usize {
        match &self.source {
            DatasetSource::Idx { .. } => 28 * 28,
            DatasetSource::Synthetic(p) => p.shape.len(),
        }
    }

    /// Materializes the dataset. `seed` drives synthetic generation unless
    /// the spec pins its own.
    pub fn load(&self, data_dir: &Path, seed: u64) -> Result<LabeledDataset, DataError> {
        match &self.source {
            DatasetSource::Idx { images, labels } => {
                let ds = idx::load_idx(resolve(data_dir, images), resolve(data_dir, labels))?;
                let counts = ds.num_classes();
                if counts > self.num_classes {
                    return Err(DataError::Param(format!(
                        "{}: labels reach class {} but spec declares {} classes",
                        self.name,
                        counts - 1,
                        self.num_classes
                    )));
                }
                LabeledDataset::new(ds.x().clone(), ds.y().to_vec(), self.clone())
            }
            DatasetSource::Synthetic(p) => synth::synth_dataset(self, p.seed.unwrap_or(seed)),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        DatasetSpec::parse(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DataError::Param(format!("line {}: expected key = value", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        DatasetSpec::from_pairs(pairs)
    }

    /// Builds a spec from key/value pairs (shared by the file format and
    /// inline experiment configs).
    pub fn from_pairs<I>(pairs: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if map.insert(k.clone(), v).is_some() {
                return Err(DataError::Param(format!("duplicate key `{k}`")));
            }
        }
        let mut kv = Keys(map);
        let source = kv.take("source").unwrap_or_else(|| "synthetic".into());
        let spec = match source.as_str() {
            "mnist" => {
                let mut s = DatasetSpec::mnist();
                if let Some(name) = kv.take("name") {
                    s.name = name;
                }
                s
            }
            "idx" => DatasetSpec {
                name: kv.require("name")?,
                source: DatasetSource::Idx {
                    images: kv.require("images")?.into(),
                    labels: kv.require("labels")?.into(),
                },
                num_classes: kv.parse("classes")?.ok_or_else(|| missing("classes"))?,
            },
            "synthetic" => {
                let d = SynthParams::default();
                let dims: Option<usize> = kv.parse("dims")?;
                let height: Option<usize> = kv.parse("height")?;
                let width: Option<usize> = kv.parse("width")?;
                let shape = match (dims, height, width) {
                    (Some(n), None, None) => NativeShape::Vector(n),
                    (None, Some(h), Some(w)) => NativeShape::Image { height: h, width: w },
                    (None, None, None) => d.shape,
                    _ => {
                        return Err(DataError::Param(
                            "give either `dims` or both `height` and `width`".into(),
                        ))
                    }
                };
                let params = SynthParams {
                    samples_per_class: kv.parse("samples_per_class")?.unwrap_or(d.samples_per_class),
                    sigma: kv.parse("sigma")?.unwrap_or(d.sigma),
                    shape,
                    proto_min: kv.parse("proto_min")?.unwrap_or(d.proto_min),
                    proto_max: kv.parse("proto_max")?.unwrap_or(d.proto_max),
                    density: kv.parse("density")?.unwrap_or(d.density),
                    seed: kv.parse("seed")?,
                };
                let spec = DatasetSpec::synthetic(
                    &kv.require("name")?,
                    kv.parse("classes")?.ok_or_else(|| missing("classes"))?,
                    params,
                );
                spec.validate()?;
                spec
            }
            other => return Err(DataError::Param(format!("unknown source `{other}`"))),
        };
        if let Some(k) = kv.0.keys().next() {
            return Err(DataError::Param(format!("unknown key `{k}`")));
        }
        if spec.num_classes == 0 {
            return Err(DataError::Param("classes must be >= 1".into()));
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if let DatasetSource::Synthetic(p) = &self.source {
            if !(p.sigma >= 0.0) || !p.sigma.is_finite() {
                return Err(DataError::Param(format!("sigma must be >= 0, got {}", p.sigma)));
            }
            if p.shape.is_empty() {
                return Err(DataError::Param("native dimensionality must be >= 1".into()));
            }
            if !(0.0 <= p.proto_min && p.proto_min <= p.proto_max && p.proto_max <= 1.0) {
                return Err(DataError::Param(
                    "prototype range must satisfy 0 <= proto_min <= proto_max <= 1".into(),
                ));
            }
            if !(p.density > 0.0 && p.density <= 1.0) {
                return Err(DataError::Param(format!("density must lie in (0, 1], got {}", p.density)));
            }
            if p.samples_per_class == 0 {
                return Err(DataError::Param("samples_per_class must be >= 1".into()));
            }
        }
        Ok(())
    }
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn missing(key: &str) -> DataError {
    DataError::Param(format!("missing key `{key}`"))
}

struct Keys(BTreeMap<String, String>);

impl Keys {
    fn take(&mut self, k: &str) -> Option<String> {
        self.0.remove(k)
    }

    fn require(&mut self, k: &str) -> Result<String, DataError> {
        self.take(k).ok_or_else(|| missing(k))
    }

    fn parse<T: std::str::FromStr>(&mut self, k: &str) -> Result<Option<T>, DataError> {
        self.take(k)
            .map(|v| {
                v.parse()
                    .map_err(|_| DataError::Param(format!("bad value `{v}` for `{k}`")))
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_synthetic() {
        let s = DatasetSpec::parse(
            "# blobs\nname = b\nclasses = 3\nsamples_per_class = 7 # per class\nsigma = 0.2\ndims = 561\n",
        )
        .unwrap();
        assert_eq!(s.name, "b");
        assert_eq!(s.num_classes, 3);
        assert_eq!(s.native_dims(), 561);
        let DatasetSource::Synthetic(p) = &s.source else { panic!() };
        assert_eq!(p.samples_per_class, 7);
        assert_eq!(p.sigma, 0.2);
        assert_eq!(p.seed, None);
    }

    #[test]
    fn parses_images_and_presets() {
        let s = DatasetSpec::parse("name=i\nclasses=2\nheight=32\nwidth=30\nseed=4").unwrap();
        assert_eq!(s.native_dims(), 960);
        let m = DatasetSpec::parse("source = mnist").unwrap();
        assert_eq!(m, DatasetSpec::mnist());
        let i = DatasetSpec::parse("source=idx\nname=d\nimages=a\nlabels=b\nclasses=10").unwrap();
        assert!(matches!(i.source, DatasetSource::Idx { .. }));
    }

    #[test]
    fn rejects_bad_specs() {
        for text in [
            "name=b\nclasses=2\nsigma=-0.1",
            "name=b\nclasses=2\ncolour=red",
            "name=b\nclasses=2\nclasses=3",
            "name=b",
            "classes=2",
            "name=b\nclasses=2\ndims=10\nheight=3\nwidth=3",
            "name=b\nclasses=x",
            "just words",
            "source=tape\nname=b\nclasses=2",
        ] {
            assert!(DatasetSpec::parse(text).is_err(), "{text}");
        }
    }
}
