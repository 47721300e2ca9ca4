use super::{CentroidIndex, ExpertEntry, MatchError};
use crate::nn::{Autoencoder, Embedding};

/// Threshold value that turns rejection off.
pub const REJECTION_DISABLED: f64 = -1.0;

/// Outcome of routing one query embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Chosen expert `k*`; `None` when rejected.
    pub expert_id: Option<u32>,
    /// Chosen class `n*` within `k*`; `None` when fine assignment was not
    /// requested or the query was rejected.
    pub class_id: Option<u32>,
    /// `(expert_id, cosine)` for every expert, ascending by id.
    pub coarse_scores: Vec<(u32, f64)>,
    /// Cosine against each class centroid of `k*`.
    pub fine_scores: Option<Vec<f64>>,
    pub rejected: bool,
}

impl Assignment {
    /// Best coarse score (`-inf` for an empty score list).
    pub fn top_score(&self) -> f64 {
        self.coarse_scores
            .iter()
            .map(|&(_, s)| s)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MatchError> {
    if a.len() != b.len() {
        return Err(MatchError::Shape {
            what: "cosine operand",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(MatchError::ZeroVector);
    }
    Ok((dot / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// Cosine for ranking: an undefined similarity scores `-inf`.
pub fn similarity(a: &Embedding, b: &Embedding) -> f64 {
    cosine(a.as_slice(), b.as_slice()).unwrap_or(f64::NEG_INFINITY)
}

/// Position of the first maximum; later equal scores never win.
fn argmax(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(s > b) => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// Coarse assignment: the expert whose dataset centroid is most similar.
pub fn coarse_assign(x: &Embedding, index: &CentroidIndex) -> Result<Assignment, MatchError> {
    let coarse_scores: Vec<(u32, f64)> = index
        .entries()
        .map(|e| (e.expert_id, similarity(x, &e.dataset_centroid)))
        .collect();
    let best = argmax(coarse_scores.iter().map(|&(_, s)| s)).ok_or(MatchError::EmptyIndex)?;
    Ok(Assignment {
        expert_id: Some(coarse_scores[best].0),
        class_id: None,
        coarse_scores,
        fine_scores: None,
        rejected: false,
    })
}

/// Fine assignment within one expert: `(class id, per-class scores)`.
pub fn fine_assign(x: &Embedding, entry: &ExpertEntry) -> (u32, Vec<f64>) {
    let scores: Vec<f64> = entry
        .class_centroids
        .iter()
        .map(|c| similarity(x, c))
        .collect();
    // entries always hold at least one class
    let best = argmax(scores.iter().copied()).unwrap_or(0);
    (best as u32, scores)
}

/// Coarse assignment followed by fine assignment inside the chosen expert.
pub fn assign_hierarchical(x: &Embedding, index: &CentroidIndex) -> Result<Assignment, MatchError> {
    let mut a = coarse_assign(x, index)?;
    let entry = a
        .expert_id
        .and_then(|k| index.get(k))
        .ok_or(MatchError::EmptyIndex)?;
    let (class, scores) = fine_assign(x, entry);
    a.class_id = Some(class);
    a.fine_scores = Some(scores);
    Ok(a)
}

/// Hierarchical assignment that declines queries whose best coarse score is
/// below `tau`. Any `tau <= -1` disables rejection.
pub fn assign_with_rejection(
    x: &Embedding,
    index: &CentroidIndex,
    tau: f64,
) -> Result<Assignment, MatchError> {
    route(x, index, tau, true)
}

/// Coarse assignment, fine assignment when `want_fine`, then the rejection
/// rule of [`assign_with_rejection`].
pub fn route(
    x: &Embedding,
    index: &CentroidIndex,
    tau: f64,
    want_fine: bool,
) -> Result<Assignment, MatchError> {
    let mut a = if want_fine {
        assign_hierarchical(x, index)?
    } else {
        coarse_assign(x, index)?
    };
    if tau > REJECTION_DISABLED && a.top_score() < tau {
        a.rejected = true;
        a.expert_id = None;
        a.class_id = None;
        a.fine_scores = None;
    }
    Ok(a)
}

/// Raw-data baseline: position of the autoencoder reconstructing `x_raw`
/// with the lowest MSE (ties go to the lower position).
pub fn mse_baseline_assign(x_raw: &[f64], server_aes: &[Autoencoder]) -> Result<usize, MatchError> {
    let errors = server_aes
        .iter()
        .map(|ae| ae.reconstruction_error(x_raw))
        .collect::<Result<Vec<f64>, _>>()?;
    argmax(errors.iter().map(|e| -e)).ok_or(MatchError::EmptyIndex)
}

/// Percentage of positions where `predicted` equals `truth`.
pub fn evaluate_accuracy<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64, MatchError> {
    if predicted.len() != truth.len() {
        return Err(MatchError::Shape {
            what: "prediction count",
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(MatchError::EmptyInput);
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}
