//! Algorithm configuration and attribution outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::RankingMode;

/// A partition of `0..n` into disjoint, non-empty groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    groups: Vec<Vec<usize>>,
}

impl GroupSpec {
    pub fn new(groups: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let spec = Self { groups };
        spec.validate(n)?;
        Ok(spec)
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            groups: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Consecutive blocks of `size` features (the last may be shorter).
    pub fn contiguous(n: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidConfig("group size must be positive".into()));
        }
        let groups = (0..n)
            .step_by(size)
            .map(|start| (start..(start + size).min(n)).collect())
            .collect();
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![0usize; n];
        let mut duplicated = Vec::new();
        for &i in self.groups.iter().flatten() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            seen[i] += 1;
            if seen[i] == 2 {
                duplicated.push(i);
            }
        }
        let uncovered: Vec<usize> = (0..n).filter(|&i| seen[i] == 0).collect();
        if !uncovered.is_empty() || !duplicated.is_empty() {
            duplicated.sort_unstable();
            return Err(Error::Partition {
                n,
                uncovered,
                duplicated,
            });
        }
        if self.groups.iter().any(Vec::is_empty) {
            return Err(Error::InvalidConfig("empty group in partition".into()));
        }
        Ok(())
    }
}

/// Rounds `R`, selections per round `z`, integration steps `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub rounds: usize,
    pub per_round: usize,
    pub steps: usize,
    pub seed: u64,
    pub ranking: RankingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupSpec>,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            per_round: 1,
            steps: 20,
            seed: 0,
            ranking: RankingMode::Signed,
            groups: None,
        }
    }
}

impl AlgoConfig {
    pub fn new(rounds: usize, per_round: usize, steps: usize) -> Self {
        Self {
            rounds,
            per_round,
            steps,
            ..Self::default()
        }
    }

    pub fn with_ranking(mut self, ranking: RankingMode) -> Self {
        self.ranking = ranking;
        self
    }

    pub fn with_groups(mut self, groups: GroupSpec) -> Self {
        self.groups = Some(groups);
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.rounds == 0 || self.per_round == 0 {
            return Err(Error::InvalidConfig(format!(
                "rounds ({}) and per_round ({}) must be positive",
                self.rounds, self.per_round
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be positive".into()));
        }
        if let Some(groups) = &self.groups {
            groups.validate(n)?;
        }
        Ok(())
    }
}

/// One adaptive round: candidate scores over all features (zero on the
/// already-selected set) and the indices chosen this round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub chosen: Vec<usize>,
    pub candidate_scores: Vec<f64>,
    pub selected_total: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Number of gradient-oracle calls consumed.
    pub gradient_evaluations: usize,
    /// Selected features whose accumulated score is negative.
    pub negative_selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub algorithm: String,
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_order: Option<Vec<usize>>,
    pub config: AlgoConfig,
    pub diagnostics: Diagnostics,
}

impl AttributionResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The first `k` entries of the selection order.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }
}
