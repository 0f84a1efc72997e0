use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{stratified_split, Dataset};
use crate::error::{MtdError, Result};

/// Seeded partition of a dataset into a pretraining subset and `N` ordered
/// chunks. The stored order inside each chunk is the streaming order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamPlan {
    pub pretrain_fraction: f64,
    pub chunk_count: usize,
    pub seed: u64,
    pub pretrain_indices: Vec<usize>,
    pub chunks: Vec<Vec<usize>>,
}

impl StreamPlan {
    /// Number of dataset samples the plan covers.
    pub fn len(&self) -> usize {
        self.pretrain_indices.len() + self.chunks.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hex SHA-256 over the plan's parameters and index lists.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"streamplan-v1");
        h.update(self.pretrain_fraction.to_bits().to_le_bytes());
        h.update((self.chunk_count as u64).to_le_bytes());
        h.update(self.seed.to_le_bytes());
        let mut put_list = |list: &[usize]| {
            h.update((list.len() as u64).to_le_bytes());
            for &i in list {
                h.update((i as u64).to_le_bytes());
            }
        };
        put_list(&self.pretrain_indices);
        for chunk in &self.chunks {
            put_list(chunk);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks that the plan indexes exactly the samples of a dataset of
    /// length `n`, each once.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.pretrain_indices.iter().chain(self.chunks.iter().flatten()) {
            if i >= n || seen[i] {
                return Err(MtdError::config(format!(
                    "plan index {i} is out of range or repeated for a dataset of {n}"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(MtdError::config("plan does not cover the whole dataset"));
        }
        Ok(())
    }
}

pub fn make_plan(dataset: &Dataset, pretrain_fraction: f64, chunk_count: usize, seed: u64) -> Result<StreamPlan> {
    if !(pretrain_fraction > 0.0 && pretrain_fraction < 1.0) {
        return Err(MtdError::config(format!(
            "pretrain fraction must lie in (0, 1), got {pretrain_fraction}"
        )));
    }
    if chunk_count == 0 {
        return Err(MtdError::config("chunk count must be at least 1"));
    }
    let (pretrain_indices, streamed) = stratified_split(dataset, pretrain_fraction, seed);

    let mut covered = vec![false; dataset.classes()];
    for &i in &pretrain_indices {
        covered[dataset.samples()[i].label.index()] = true;
    }
    if let Some(missing) = covered.iter().position(|c| !c) {
        return Err(MtdError::config(format!(
            "class {missing} has no pretraining sample"
        )));
    }
    if streamed.len() < chunk_count {
        return Err(MtdError::config(format!(
            "{} streamed samples cannot fill {chunk_count} non-empty chunks",
            streamed.len()
        )));
    }

    let base = streamed.len() / chunk_count;
    let extra = streamed.len() % chunk_count;
    let mut chunks = Vec::with_capacity(chunk_count);
    let mut start = 0;
    for k in 0..chunk_count {
        let size = base + usize::from(k < extra);
        chunks.push(streamed[start..start + size].to_vec());
        start += size;
    }

    Ok(StreamPlan {
        pretrain_fraction,
        chunk_count,
        seed,
        pretrain_indices,
        chunks,
    })
}
