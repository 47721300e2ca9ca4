use super::{DataError, LabeledDataset};
use crate::nn::Rng;

/// Disjoint server / client A / client B row indices (≈ 50/25/25).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    pub server_idx: Vec<usize>,
    pub client_a_idx: Vec<usize>,
    pub client_b_idx: Vec<usize>,
}

impl SplitAssignment {
    pub fn sizes(&self) -> [usize; 3] {
        [self.server_idx.len(), self.client_a_idx.len(), self.client_b_idx.len()]
    }

    /// Client `0` is A, `1` is B.
    pub fn client(&self, which: usize) -> &[usize] {
        match which {
            0 => &self.client_a_idx,
            _ => &self.client_b_idx,
        }
    }
}

const SHARES: [f64; 3] = [0.5, 0.25, 0.25];

/// Stratified 50/25/25 split.
///
/// Each class contributes `floor(n/2)`, `floor(n/4)`, `floor(n/4)` rows and
/// any leftover row goes to whichever part is furthest behind its overall
/// target, so per-class counts stay within one row of their share and the
/// totals land on the global proportions.
pub fn split(ds: &LabeledDataset, seed: u64) -> Result<SplitAssignment, DataError> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, &l) in ds.y().iter().enumerate() {
        by_class[l].push(i);
    }
    if let Some((class, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < 4) {
        return Err(DataError::Stratification {
            class,
            count: members.len(),
        });
    }
    let mut rng = Rng::new(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    let mut seen = 0usize;
    for mut members in by_class {
        let n = members.len();
        seen += n;
        rng.shuffle(&mut members);
        let mut take = [n / 2, n / 4, n / 4];
        for _ in 0..n - take.iter().sum::<usize>() {
            let deficit = |k: usize| SHARES[k] * seen as f64 - (parts[k].len() + take[k]) as f64;
            let k = (0..3)
                .max_by(|&a, &b| deficit(a).total_cmp(&deficit(b)).then(b.cmp(&a)))
                .unwrap();
            take[k] += 1;
        }
        let mut rest = members.as_slice();
        for (part, t) in parts.iter_mut().zip(take) {
            let (head, tail) = rest.split_at(t);
            part.extend_from_slice(head);
            rest = tail;
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    let [server_idx, client_a_idx, client_b_idx] = parts;
    Ok(SplitAssignment {
        server_idx,
        client_a_idx,
        client_b_idx,
    })
}
