use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::MatchError;
use crate::data::LabeledDataset;
use crate::nn::{Autoencoder, Embedding, HIDDEN_DIM};
use crate::par::Exec;

pub const INDEX_MAGIC: [u8; 4] = *b"EMCI";
pub const INDEX_VERSION: u16 = 1;

/// Centroids of one expert: the mean embedding of its dataset and of each class.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertEntry {
    pub expert_id: u32,
    pub dataset_centroid: Embedding,
    pub class_centroids: Vec<Embedding>,
}

impl ExpertEntry {
    pub fn new(
        expert_id: u32,
        dataset_centroid: Embedding,
        class_centroids: Vec<Embedding>,
    ) -> Result<Self, MatchError> {
        if class_centroids.is_empty() {
            return Err(MatchError::NoClasses);
        }
        Ok(ExpertEntry {
            expert_id,
            dataset_centroid,
            class_centroids,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_centroids.len()
    }

    /// Little-endian: id u32, N u32, dataset centroid, then N class centroids (f64).
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.expert_id.to_le_bytes())?;
        w.write_all(&(self.class_centroids.len() as u32).to_le_bytes())?;
        for c in std::iter::once(&self.dataset_centroid).chain(&self.class_centroids) {
            for v in c.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Inverse of [`write_to`](Self::write_to). `max_classes` bounds the
    /// allocation a hostile header can request.
    pub fn read_from<R: Read>(r: &mut R, max_classes: usize) -> Result<Self, MatchError> {
        let mut head = [0u8; 8];
        r.read_exact(&mut head)
            .map_err(|_| MatchError::Format("truncated entry header".into()))?;
        let expert_id = u32::from_le_bytes(head[..4].try_into().unwrap());
        let n = u32::from_le_bytes(head[4..].try_into().unwrap()) as usize;
        if n == 0 {
            return Err(MatchError::NoClasses);
        }
        if n > max_classes {
            return Err(MatchError::Format(format!("{n} classes exceeds limit {max_classes}")));
        }
        let mut read_vec = || -> Result<Embedding, MatchError> {
            let mut buf = [0u8; HIDDEN_DIM * 8];
            r.read_exact(&mut buf)
                .map_err(|_| MatchError::Format("truncated centroid".into()))?;
            let v = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Embedding::new(v)?)
        };
        let dataset_centroid = read_vec()?;
        let class_centroids = (0..n).map(|_| read_vec()).collect::<Result<_, _>>()?;
        ExpertEntry::new(expert_id, dataset_centroid, class_centroids)
    }
}

/// Expert centroids keyed by expert id. Iteration is in ascending id order,
/// which is also the tie-breaking order of every argmax.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CentroidIndex {
    entries: BTreeMap<u32, ExpertEntry>,
}

impl CentroidIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<ExpertEntry>) -> Result<Self, MatchError> {
        let mut index = CentroidIndex::new();
        for e in entries {
            let id = e.expert_id;
            if index.insert(e).is_some() {
                return Err(MatchError::DuplicateExpert(id));
            }
        }
        Ok(index)
    }

    /// Adds or replaces the entry for `entry.expert_id`, returning the old one.
    pub fn insert(&mut self, entry: ExpertEntry) -> Option<ExpertEntry> {
        self.entries.insert(entry.expert_id, entry)
    }

    pub fn get(&self, expert_id: u32) -> Option<&ExpertEntry> {
        self.entries.get(&expert_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &ExpertEntry> {
        self.entries.values()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), MatchError> {
        w.write_all(&INDEX_MAGIC)?;
        w.write_all(&INDEX_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for e in self.entries.values() {
            e.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, MatchError> {
        let mut head = [0u8; 10];
        r.read_exact(&mut head)
            .map_err(|_| MatchError::Format("file shorter than header".into()))?;
        if head[..4] != INDEX_MAGIC {
            return Err(MatchError::Format(format!("bad magic {:02x?}", &head[..4])));
        }
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != INDEX_VERSION {
            return Err(MatchError::Format(format!("unsupported version {version}")));
        }
        let k = u32::from_le_bytes(head[6..10].try_into().unwrap());
        let entries = (0..k)
            .map(|_| ExpertEntry::read_from(r, u16::MAX as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(MatchError::Format("trailing bytes after entries".into()));
        }
        CentroidIndex::from_entries(entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MatchError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MatchError> {
        CentroidIndex::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn mean(vectors: &[&Embedding]) -> Embedding {
    let mut acc = vec![0.0; HIDDEN_DIM];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    Embedding::new(acc.into_iter().map(|a| a / n).collect()).expect("mean of finite embeddings")
}

/// Embeds the whole dataset with `ae` and averages: once over everything,
/// once per class.
pub fn build_centroids(
    ae: &Autoencoder,
    ds: &LabeledDataset,
    expert_id: u32,
    exec: Exec,
) -> Result<ExpertEntry, MatchError> {
    if ds.is_empty() {
        return Err(MatchError::EmptyInput);
    }
    let embeddings = ae.embed_rows(ds.x(), exec)?;
    let all: Vec<&Embedding> = embeddings.iter().collect();
    let mut per_class: Vec<Vec<&Embedding>> = vec![Vec::new(); ds.num_classes()];
    for (e, &l) in embeddings.iter().zip(ds.y()) {
        per_class[l].push(e);
    }
    if let Some(class) = per_class.iter().position(Vec::is_empty) {
        return Err(MatchError::MissingClass { class });
    }
    ExpertEntry::new(
        expert_id,
        mean(&all),
        per_class.iter().map(|members| mean(members)).collect(),
    )
}
