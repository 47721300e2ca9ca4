//! `embed-router`: train autoencoders, run the registry server, route
//! client embeddings and reproduce the evaluation tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use embed_router_core::data::DATA_DIR_ENV;
use embed_router_core::experiment::{
    self, resolve_dataset, Client as ClientId, ExperimentConfig, ExperimentError,
};
use embed_router_core::matcher::{build_centroids, CentroidIndex, SharedIndex};
use embed_router_core::{Autoencoder, Exec};
use embed_router_wire::{default_addr, Client, Server, ADDR_ENV};

#[derive(Parser)]
#[command(name = "embed-router", version, about = "Route client embeddings to server-side expert models")]
struct Cli {
    /// Master seed; overrides the seed of an experiment config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Registry server address.
    #[arg(long, global = true, env = ADDR_ENV, default_value_t = default_addr())]
    addr: String,
    /// Directory holding dataset files.
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = "data")]
    data_dir: PathBuf,
    /// Run every batch operation on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Server,
    A,
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    A,
    B,
}

impl From<Side> for ClientId {
    fn from(s: Side) -> Self {
        match s {
            Side::A => ClientId::A,
            Side::B => ClientId::B,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one autoencoder on a split of a dataset.
    Train {
        /// Built-in dataset (mnist, synth-blobs, synth-glyphs) or spec file.
        #[arg(long)]
        dataset: String,
        /// Which split to train on.
        #[arg(long, value_enum, default_value = "server")]
        role: Role,
        #[arg(long, short)]
        out: PathBuf,
        /// Loss history CSV; defaults to the model path with `.loss.csv`.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
        /// Override the number of epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Build centroids of a server model on its server split and register them.
    Register {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        expert_id: u32,
        /// Also save the entry as a one-expert index file.
        #[arg(long)]
        index_out: Option<PathBuf>,
    },
    /// Run the registry server.
    Serve {
        /// Preload an index file.
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Embed client samples with a client model and query the server.
    Match {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long, value_enum, default_value = "a")]
        client: Side,
        /// Number of client samples to send.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Rejection threshold; -1 disables rejection.
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        threshold: f32,
        /// Skip fine (class) assignment.
        #[arg(long)]
        coarse_only: bool,
        #[arg(long, default_value_t = 10)]
        timeout_secs: u64,
    },
    /// Run the client/server evaluation and write results.csv.
    Evaluate {
        /// TOML experiment file; defaults to the desk-scale setup.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the evaluation with shared and with independent client seeds.
    SeedAblation {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes 2 and 3.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(3)
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn exec(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

/// Single-dataset configuration shared by `train`, `register` and `match`,
/// so all three see the same split.
fn single_config(cli: &Cli, dataset: &str) -> Result<ExperimentConfig, Failure> {
    let spec = resolve_dataset(dataset, Path::new("."))?;
    let mut cfg = ExperimentConfig::desk_scale(&cli.data_dir, cli.seed.unwrap_or(0));
    cfg.datasets = vec![spec];
    cfg.exec = exec(cli);
    Ok(cfg)
}

fn experiment_config(cli: &Cli, config: &Option<PathBuf>, output_dir: &Option<PathBuf>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(path, &cli.data_dir).map_err(|e| Failure::Config(e.into()))?,
        None => ExperimentConfig::desk_scale(&cli.data_dir, 0),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.exec = exec(cli);
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Train {
            dataset,
            role,
            out,
            loss_csv,
            epochs,
        } => {
            let mut cfg = single_config(&cli, dataset)?;
            if let Some(e) = epochs {
                cfg.train.epochs = *e;
            }
            let prepared = experiment::prepare_dataset(&cfg, 0)?;
            let (model, history) = match role {
                Role::Server => experiment::train_server_model(&cfg, &prepared.server)?,
                Role::A => experiment::train_client_model(&cfg, 0, ClientId::A, prepared.client(ClientId::A))?,
                Role::B => experiment::train_client_model(&cfg, 0, ClientId::B, prepared.client(ClientId::B))?,
            };
            model.save(out).map_err(|e| anyhow!(e)).with_context(|| format!("saving {}", out.display()))?;
            let loss_path = loss_csv.clone().unwrap_or_else(|| out.with_extension("loss.csv"));
            let mut csv = String::from("epoch,loss\n");
            for (i, l) in history.iter().enumerate() {
                let _ = writeln!(csv, "{},{l:e}", i + 1);
            }
            write_file(&loss_path, &csv)?;
            println!(
                "trained {} ({} epochs, loss {:.6} -> {:.6}); wrote {} and {}",
                dataset,
                history.len(),
                history[0],
                history[history.len() - 1],
                out.display(),
                loss_path.display()
            );
        }
        Command::Register {
            model,
            dataset,
            expert_id,
            index_out,
        } => {
            let cfg = single_config(&cli, dataset)?;
            let ae = load_model(model)?;
            let prepared = experiment::prepare_dataset(&cfg, 0)?;
            let entry = build_centroids(&ae, &prepared.server, *expert_id, cfg.exec).map_err(|e| anyhow!(e))?;
            if let Some(path) = index_out {
                CentroidIndex::from_entries(vec![entry.clone()])
                    .and_then(|i| i.save(path))
                    .map_err(|e| anyhow!(e))?;
            }
            let mut client = Client::connect(&cli.addr, Duration::from_secs(10)).map_err(|e| anyhow!(e))?;
            let status = client.register(&entry).map_err(|e| anyhow!(e))?;
            println!(
                "registered expert {expert_id} ({dataset}, {} classes){}; server holds {} experts",
                entry.class_count(),
                if status.replaced { ", replacing the previous entry" } else { "" },
                status.entries
            );
        }
        Command::Serve { index } => {
            let idx = match index {
                Some(p) => CentroidIndex::load(p).map_err(|e| Failure::Config(anyhow!(e)))?,
                None => CentroidIndex::new(),
            };
            let server = Server::bind(&cli.addr, SharedIndex::new(idx))
                .with_context(|| format!("binding {}", cli.addr))?;
            println!("serving on {}", server.local_addr());
            server.run().context("accept loop")?;
        }
        Command::Match {
            model,
            dataset,
            client,
            samples,
            threshold,
            coarse_only,
            timeout_secs,
        } => {
            let cfg = single_config(&cli, dataset)?;
            let ae = load_model(model)?;
            let prepared = experiment::prepare_dataset(&cfg, 0)?;
            let ds = prepared.client((*client).into());
            let n = (*samples).min(ds.len());
            let idx: Vec<usize> = (0..n).collect();
            let queries = ae.embed_rows(&ds.x().select_rows(&idx), cfg.exec).map_err(|e| anyhow!(e))?;
            let mut conn = Client::connect(&cli.addr, Duration::from_secs(*timeout_secs)).map_err(|e| anyhow!(e))?;
            println!("sample,label,expert,class,score,rejected");
            for (i, q) in queries.iter().enumerate() {
                let r = conn
                    .match_embedding(&q.to_f32(), *threshold, !coarse_only)
                    .map_err(|e| anyhow!(e))?;
                let show = |v: Option<u32>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
                println!(
                    "{i},{},{},{},{:.6},{}",
                    ds.y()[i],
                    show(r.expert()),
                    show(r.class()),
                    r.score,
                    r.rejected
                );
            }
        }
        Command::Evaluate { config, output_dir } => {
            let cfg = experiment_config(&cli, config, output_dir)?;
            let table = experiment::evaluate(&cfg)?;
            let path = cfg.output_dir.join("results.csv");
            write_file(&path, &table.to_csv())?;
            print!("{}", table.render());
            println!("wrote {}", path.display());
        }
        Command::SeedAblation { config, output_dir } => {
            let cfg = experiment_config(&cli, config, output_dir)?;
            let table = experiment::seed_ablation(&cfg)?;
            let path = cfg.output_dir.join("seed_ablation.csv");
            write_file(&path, &table.to_csv())?;
            print!("{}", table.render());
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Autoencoder, Failure> {
    Autoencoder::load(path)
        .map_err(|e| Failure::Config(anyhow!("{}: {e}", path.display())))
}
