//! Selected feature sets, their indicator masks, and deterministic ranking.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::FeatureMask;

/// An ordered set of distinct feature indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionState {
    selected: Vec<usize>,
}

impl SelectionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a selection, rejecting duplicates.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut state = Self::new();
        for i in indices {
            state.insert(i)?;
        }
        Ok(state)
    }

    pub fn insert(&mut self, index: usize) -> Result<()> {
        if self.contains(index) {
            return Err(Error::DuplicateIndex(index));
        }
        self.selected.push(index);
        Ok(())
    }

    pub fn contains(&self, index: usize) -> bool {
        self.selected.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Indices in selection order.
    pub fn indices(&self) -> &[usize] {
        &self.selected
    }

    /// The frozen mask `1_S` over `n` features.
    pub fn frozen_mask(&self, n: usize) -> Result<FeatureMask> {
        mask_from_selection(self, n)
    }
}

/// The indicator vector `1_S` in `{0, 1}^n`.
pub fn mask_from_selection(state: &SelectionState, n: usize) -> Result<FeatureMask> {
    indicator(state.indices(), n).and_then(FeatureMask::new)
}

/// Indicator of an arbitrary index list; duplicates are rejected.
pub fn indicator(indices: &[usize], n: usize) -> Result<Vec<f64>> {
    let mut mask = vec![0.0; n];
    for &i in indices {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if mask[i] == 1.0 {
            return Err(Error::DuplicateIndex(i));
        }
        mask[i] = 1.0;
    }
    Ok(mask)
}

/// How scores are compared when ranking features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    /// Largest signed score first.
    #[default]
    Signed,
    /// Largest magnitude first.
    Absolute,
}

impl RankingMode {
    fn key(self, v: f64) -> f64 {
        match self {
            RankingMode::Signed => v,
            RankingMode::Absolute => v.abs(),
        }
    }

    /// Descending comparison; equal keys fall back to the lower index.
    pub fn compare(self, scores: &[f64], a: usize, b: usize) -> Ordering {
        self.key(scores[b]).total_cmp(&self.key(scores[a])).then(a.cmp(&b))
    }
}

impl std::str::FromStr for RankingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(RankingMode::Signed),
            "absolute" => Ok(RankingMode::Absolute),
            other => Err(Error::Parse(format!(
                "unknown ranking mode '{other}' (expected signed or absolute)"
            ))),
        }
    }
}

/// All indices of `scores` sorted best first.
pub fn argsort(scores: &[f64], mode: RankingMode) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| mode.compare(scores, a, b));
    idx
}

/// The best `k` of `candidates` under `mode`, best first.
pub fn top_k(scores: &[f64], candidates: &[usize], k: usize, mode: RankingMode) -> Vec<usize> {
    let mut idx = candidates.to_vec();
    idx.sort_by(|&a, &b| mode.compare(scores, a, b));
    idx.truncate(k);
    idx
}
