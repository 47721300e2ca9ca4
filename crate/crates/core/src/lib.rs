//! Embedding-only expert routing.
//!
//! Clients and the server each train a small dense autoencoder
//! (784 → 128 → 784) from a shared seed. The server keeps, per expert
//! dataset, the mean hidden representation of its dataset and of each class.
//! A client query is a single 128-dim hidden representation; it is routed to
//! the expert whose dataset centroid is most cosine-similar (coarse
//! assignment) and then to the most similar class centroid of that expert
//! (fine assignment).
//!
//! Modules:
//! - [`nn`]: matrices, seeded RNG, the autoencoder, Adam and the training loop.
//! - [`data`]: IDX ingestion, preprocessing to 784 features, synthetic data, splits.
//! - [`matcher`]: centroid index and the assignment rules.
//! - [`experiment`]: the client/server evaluation harness producing result tables.
//! - [`par`]: rayon-backed data parallelism with a sequential fallback.

pub mod data;
pub mod experiment;
pub mod matcher;
pub mod nn;
pub mod par;

pub use data::{DatasetSpec, LabeledDataset, SplitAssignment};
pub use matcher::{Assignment, CentroidIndex, ExpertEntry};
pub use nn::{Autoencoder, Embedding, Matrix, Rng, TrainConfig, HIDDEN_DIM, INPUT_DIM};
pub use par::Exec;
