//! Centroid construction and the assignment rules.
//!
//! Coarse assignment picks the expert whose dataset centroid has the highest
//! cosine similarity with the query embedding; fine assignment then picks
//! the class centroid of that expert with the highest similarity. Centroids
//! are stored unnormalized (plain means); normalization happens inside the
//! cosine at query time.
//!
//! A zero-norm vector has no direction. Ranking code gives such pairs a score
//! of `-inf` instead of failing, so a query whose hidden units are all
//! inactive is answered (and loses every comparison) instead of aborting.

mod assign;
mod index;
mod shared;

use thiserror::Error;

use crate::nn::NnError;

pub use assign::{
    assign_hierarchical, assign_with_rejection, coarse_assign, cosine, evaluate_accuracy,
    fine_assign, mse_baseline_assign, route, similarity, Assignment, REJECTION_DISABLED,
};
pub use index::{build_centroids, CentroidIndex, ExpertEntry, INDEX_MAGIC, INDEX_VERSION};
pub use shared::SharedIndex;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("cosine similarity undefined for a zero-norm vector")]
    ZeroVector,
    #[error("{what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("the centroid index is empty")]
    EmptyIndex,
    #[error("class {class} has no samples")]
    MissingClass { class: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("expert id {0} appears more than once")]
    DuplicateExpert(u32),
    #[error("an expert needs at least one class centroid")]
    NoClasses,
    #[error("index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Nn(#[from] NnError),
}
