//! Client/server evaluation harness.
//!
//! For every dataset the harness trains a server autoencoder on the server
//! split and registers its centroids. Two clients then train their own
//! autoencoders on their client splits, embed every client sample and query
//! the index. Accuracy is tabulated per client, dataset, metric and method.
//!
//! Seeds are derived from [`ExperimentConfig::seed`] through fixed streams,
//! so every table cell is a pure function of the configuration.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::data::{split, DataError, DatasetSpec, LabeledDataset, NativeShape, SynthParams};
use crate::matcher::{
    assign_hierarchical, build_centroids, evaluate_accuracy, fine_assign, mse_baseline_assign,
    CentroidIndex, MatchError,
};
use crate::nn::{train, Autoencoder, Embedding, NnError, Rng, TrainConfig};
use crate::par::Exec;

const STREAM_DATA: u64 = 0x100;
const STREAM_SPLIT: u64 = 0x200;
const STREAM_SHUFFLE: u64 = 0x300;
const STREAM_CLIENT_SHUFFLE: u64 = 0x400;
const STREAM_CLIENT_INIT: u64 = 0x500;

pub const CSV_HEADER: &str = "client,dataset,metric,method,accuracy";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Whether the failure is the caller's configuration rather than a
    /// runtime condition.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_)
                | ExperimentError::Data(DataError::Param(_))
                | ExperimentError::Nn(NnError::InvalidConfig(_))
        )
    }
}

/// What the fine assignment compares against the class centroids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaMode {
    /// The client's own embedding, the only thing a client shares.
    #[default]
    ClientEmbedding,
    /// The raw query re-encoded with the chosen server autoencoder. Only
    /// possible inside the harness, where raw client data is at hand.
    ServerReencode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    pub seed: u64,
    /// Clients initialize from the server's seed.
    pub shared_seed: bool,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    pub fa_mode: FaMode,
    pub data_dir: PathBuf,
    pub exec: Exec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    datasets: Vec<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "yes")]
    shared_seed: bool,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default = "default_output")]
    output_dir: PathBuf,
    #[serde(default)]
    fa_mode: FaMode,
    data_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// MNIST plus two synthetic ten-class sets, full training recipe.
    pub fn desk_scale(data_dir: impl Into<PathBuf>, seed: u64) -> Self {
        ExperimentConfig {
            datasets: desk_datasets(),
            seed,
            shared_seed: true,
            train: TrainConfig::default(),
            output_dir: default_output(),
            fa_mode: FaMode::default(),
            data_dir: data_dir.into(),
            exec: Exec::default(),
        }
    }

    /// Parses a TOML experiment file. Dataset entries are either `mnist`,
    /// `synth-blobs`, `synth-glyphs` or paths to dataset spec files relative
    /// to `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path, default_data_dir: &Path) -> Result<Self, ExperimentError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.message().to_string()))?;
        let datasets = raw
            .datasets
            .iter()
            .map(|d| resolve_dataset(d, base_dir))
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = ExperimentConfig {
            datasets,
            seed: raw.seed,
            shared_seed: raw.shared_seed,
            train: raw.train,
            output_dir: raw.output_dir,
            fa_mode: raw.fa_mode,
            data_dir: raw.data_dir.map_or_else(|| default_data_dir.to_path_buf(), |d| base_dir.join(d)),
            exec: Exec::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, default_data_dir: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::from_toml(&text, base, default_data_dir)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.datasets.is_empty() {
            return Err(ExperimentError::Config("no datasets configured".into()));
        }
        for (i, d) in self.datasets.iter().enumerate() {
            d.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
            if self.datasets[..i].iter().any(|o| o.name == d.name) {
                return Err(ExperimentError::Config(format!("duplicate dataset name {}", d.name)));
            }
        }
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }
}

/// The two synthetic companions of MNIST in the desk-scale run: a flat
/// 561-feature set and a 32×32 image set, both with σ = 0.1.
pub fn desk_datasets() -> Vec<DatasetSpec> {
    vec![
        DatasetSpec::mnist(),
        builtin_dataset("synth-blobs").expect("builtin"),
        builtin_dataset("synth-glyphs").expect("builtin"),
    ]
}

/// A built-in dataset name, or else a dataset spec file relative to `base_dir`.
pub fn resolve_dataset(name: &str, base_dir: &Path) -> Result<DatasetSpec, ExperimentError> {
    match builtin_dataset(name) {
        Some(spec) => Ok(spec),
        None => DatasetSpec::from_file(&base_dir.join(name))
            .map_err(|e| ExperimentError::Config(format!("dataset `{name}`: {e}"))),
    }
}

pub const BUILTIN_DATASETS: [&str; 3] = ["mnist", "synth-blobs", "synth-glyphs"];

fn builtin_dataset(name: &str) -> Option<DatasetSpec> {
    // disjoint prototype ranges keep the two sets apart from each other;
    // sparse prototypes keep most relu units alive under the 1e-2 schedule
    let synth = |shape, proto_min, proto_max, density| SynthParams {
        samples_per_class: 200,
        sigma: 0.1,
        shape,
        proto_min,
        proto_max,
        density,
        seed: None,
    };
    match name {
        "mnist" => Some(DatasetSpec::mnist()),
        "synth-blobs" => Some(DatasetSpec::synthetic(
            name,
            10,
            synth(NativeShape::Vector(561), 0.2, 0.45, 0.4),
        )),
        "synth-glyphs" => Some(DatasetSpec::synthetic(
            name,
            10,
            synth(NativeShape::Image { height: 32, width: 32 }, 0.55, 1.0, 0.15),
        )),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Client {
    A,
    B,
}

impl Client {
    pub const ALL: [Client; 2] = [Client::A, Client::B];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Ca,
    Fa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Cosine,
    MseBaseline,
}

impl fmt::Display for Client {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Client::A => "A",
            Client::B => "B",
        })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Ca => "CA",
            Metric::Fa => "FA",
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cosine => "cosine",
            Method::MseBaseline => "mse_baseline",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub client: Client,
    pub dataset: String,
    pub metric: Metric,
    pub method: Method,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, client: Client, dataset: &str, metric: Metric, method: Method) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.client == client && r.dataset == dataset && r.metric == metric && r.method == method)
            .map(|r| r.accuracy)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{:.4}", r.client, r.dataset, r.metric, r.method, r.accuracy);
        }
        out
    }

    /// Console rendering: one line per (client, dataset).
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.dataset.len()).max().unwrap_or(7).max(7);
        let mut out = format!(
            "{:<6} {:<width$} {:>10} {:>10} {:>10}\n",
            "client", "dataset", "CA cosine", "CA mse", "FA cosine"
        );
        let mut seen: Vec<(Client, &str)> = Vec::new();
        for r in &self.rows {
            if seen.contains(&(r.client, r.dataset.as_str())) {
                continue;
            }
            seen.push((r.client, &r.dataset));
            let cell = |m, k| {
                self.get(r.client, &r.dataset, m, k)
                    .map_or_else(|| "-".to_string(), |a| format!("{a:.2}"))
            };
            let _ = writeln!(
                out,
                "{:<6} {:<width$} {:>10} {:>10} {:>10}",
                r.client.to_string(),
                r.dataset,
                cell(Metric::Ca, Method::Cosine),
                cell(Metric::Ca, Method::MseBaseline),
                cell(Metric::Fa, Method::Cosine),
            );
        }
        out
    }
}

/// Embedded client samples of one dataset, as sent to the server.
#[derive(Clone, Debug)]
pub struct ClientQueries {
    pub client: Client,
    pub expert_id: u32,
    pub embeddings: Vec<Embedding>,
    pub labels: Vec<usize>,
}

/// Everything an evaluation produced.
#[derive(Clone, Debug)]
pub struct EvaluationRun {
    pub table: ResultTable,
    pub index: CentroidIndex,
    pub server_models: Vec<Autoencoder>,
    pub queries: Vec<ClientQueries>,
}

/// A loaded dataset and its server / client A / client B parts.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub data: LabeledDataset,
    pub server: LabeledDataset,
    pub clients: [LabeledDataset; 2],
}

impl PreparedDataset {
    pub fn client(&self, c: Client) -> &LabeledDataset {
        &self.clients[c.index()]
    }
}

/// Loads and splits dataset `k` of the configuration.
pub fn prepare_dataset(cfg: &ExperimentConfig, k: usize) -> Result<PreparedDataset, ExperimentError> {
    let spec = cfg
        .datasets
        .get(k)
        .ok_or_else(|| ExperimentError::Config(format!("no dataset at position {k}")))?;
    let data = spec.load(&cfg.data_dir, Rng::derive_seed(cfg.seed, STREAM_DATA + k as u64))?;
    let parts = split(&data, Rng::derive_seed(cfg.seed, STREAM_SPLIT + k as u64))?;
    log::info!("{}: {} samples, split {:?}", spec.name, data.len(), parts.sizes());
    Ok(PreparedDataset {
        server: data.subset(&parts.server_idx),
        clients: [data.subset(parts.client(0)), data.subset(parts.client(1))],
        data,
    })
}

/// Trains a server autoencoder on `server` with the configuration's seed.
pub fn train_server_model(
    cfg: &ExperimentConfig,
    server: &LabeledDataset,
) -> Result<(Autoencoder, Vec<f64>), ExperimentError> {
    let mut rng = Rng::new(Rng::derive_seed(cfg.seed, STREAM_SHUFFLE));
    let out = train(Autoencoder::init(cfg.seed), server.x(), &cfg.train, &mut rng)?;
    Ok((out.model, out.loss_history))
}

fn client_stream(k: usize, client: Client) -> u64 {
    (k as u64) * 16 + client.index() as u64
}

/// Trains the autoencoder of `client` for dataset `k` on its client split.
pub fn train_client_model(
    cfg: &ExperimentConfig,
    k: usize,
    client: Client,
    ds: &LabeledDataset,
) -> Result<(Autoencoder, Vec<f64>), ExperimentError> {
    // a shared seed covers the whole generator: initialization and the
    // shuffling stream
    let (init_seed, shuffle_seed) = if cfg.shared_seed {
        (cfg.seed, Rng::derive_seed(cfg.seed, STREAM_SHUFFLE))
    } else {
        (
            Rng::derive_seed(cfg.seed, STREAM_CLIENT_INIT + client_stream(k, client)),
            Rng::derive_seed(cfg.seed, STREAM_CLIENT_SHUFFLE + client_stream(k, client)),
        )
    };
    let mut rng = Rng::new(shuffle_seed);
    let out = train(Autoencoder::init(init_seed), ds.x(), &cfg.train, &mut rng)?;
    Ok((out.model, out.loss_history))
}

/// Runs the full client/server evaluation.
pub fn run_evaluation(cfg: &ExperimentConfig) -> Result<EvaluationRun, ExperimentError> {
    cfg.validate()?;
    let prepared = (0..cfg.datasets.len())
        .map(|k| prepare_dataset(cfg, k))
        .collect::<Result<Vec<_>, _>>()?;
    let exec = cfg.exec;

    let ids: Vec<usize> = (0..prepared.len()).collect();
    let server_models: Vec<Autoencoder> = exec.try_map(&ids, |&k| {
        log::info!("training server model for {}", prepared[k].data.name());
        train_server_model(cfg, &prepared[k].server).map(|(m, _)| m)
    })?;
    let entries = ids
        .iter()
        .map(|&k| build_centroids(&server_models[k], &prepared[k].server, k as u32, exec))
        .collect::<Result<Vec<_>, _>>()?;
    let index = CentroidIndex::from_entries(entries)?;

    let jobs: Vec<(usize, Client)> = Client::ALL
        .iter()
        .flat_map(|&c| ids.iter().map(move |&k| (k, c)))
        .collect();
    let client_models = exec.try_map(&jobs, |&(k, c)| {
        log::info!("training client {c} model for {}", prepared[k].data.name());
        train_client_model(cfg, k, c, &prepared[k].clients[c.index()]).map(|(m, _)| m)
    })?;

    let mut table = ResultTable::default();
    let mut queries = Vec::with_capacity(jobs.len());
    for (&(k, client), model) in jobs.iter().zip(&client_models) {
        let ds = &prepared[k].clients[client.index()];
        let embeddings = model.embed_rows(ds.x(), exec)?;
        let truth_k = vec![k as u32; ds.len()];
        let truth_fa: Vec<(u32, u32)> = ds.y().iter().map(|&l| (k as u32, l as u32)).collect();
        let mut pred_ca = Vec::with_capacity(ds.len());
        let mut pred_fa = Vec::with_capacity(ds.len());
        let mut pred_mse = Vec::with_capacity(ds.len());
        for (i, e) in embeddings.iter().enumerate() {
            let a = assign_hierarchical(e, &index)?;
            let k_star = a.expert_id.expect("hierarchical assignment without rejection");
            let n_star = match cfg.fa_mode {
                FaMode::ClientEmbedding => a.class_id.expect("fine assignment requested"),
                FaMode::ServerReencode => {
                    let reencoded = server_models[k_star as usize].encode(ds.x().row(i))?;
                    let entry = index.get(k_star).ok_or(MatchError::EmptyIndex)?;
                    fine_assign(&reencoded, entry).0
                }
            };
            pred_ca.push(k_star);
            pred_fa.push((k_star, n_star));
            pred_mse.push(mse_baseline_assign(ds.x().row(i), &server_models)? as u32);
        }
        let name = prepared[k].data.name().to_string();
        let mut push = |metric, method, accuracy| {
            table.rows.push(ResultRow {
                client,
                dataset: name.clone(),
                metric,
                method,
                accuracy,
            })
        };
        push(Metric::Ca, Method::Cosine, evaluate_accuracy(&pred_ca, &truth_k)?);
        push(Metric::Ca, Method::MseBaseline, evaluate_accuracy(&pred_mse, &truth_k)?);
        push(Metric::Fa, Method::Cosine, evaluate_accuracy(&pred_fa, &truth_fa)?);
        queries.push(ClientQueries {
            client,
            expert_id: k as u32,
            embeddings,
            labels: ds.y().to_vec(),
        });
    }
    Ok(EvaluationRun {
        table,
        index,
        server_models,
        queries,
    })
}

pub fn evaluate(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    Ok(run_evaluation(cfg)?.table)
}

/// Both legs of the seed ablation: clients sharing the server seed, and
/// clients with independently derived seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub shared: ResultTable,
    pub independent: ResultTable,
}

impl AblationTable {
    pub const CSV_HEADER: &'static str = "seed_mode,client,dataset,metric,method,accuracy";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (mode, t) in [("shared", &self.shared), ("independent", &self.independent)] {
            for line in t.to_csv().lines().skip(1) {
                let _ = writeln!(out, "{mode},{line}");
            }
        }
        out
    }

    pub fn render(&self) -> String {
        format!(
            "shared seed\n{}\nindependent seeds\n{}",
            self.shared.render(),
            self.independent.render()
        )
    }
}

pub fn seed_ablation(cfg: &ExperimentConfig) -> Result<AblationTable, ExperimentError> {
    let leg = |shared_seed| {
        evaluate(&ExperimentConfig {
            shared_seed,
            ..cfg.clone()
        })
    };
    Ok(AblationTable {
        shared: leg(true)?,
        independent: leg(false)?,
    })
}
