//! Instance generators with known structure: replicated features, correlated
//! least squares, planted-informative tabular data and stochastic block model
//! graphs.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeIndex, NodeSplit, SparseGraph};
use crate::models::dataset::TabularDataset;
use crate::models::linreg::{linreg_solve, LinRegProblem};
use crate::objective::{Objective, SetFunction};
use crate::path::check_mask;
use crate::rng::{substream, Rng};

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// How a block of replicas is collapsed to the single base input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReplicaAggregate {
    /// `(1/beta) log((1/k) sum_i exp(beta w_i))`: equal to `w` when all
    /// replicas agree, close to `max` for large `beta`.
    SmoothMax {
        beta: f64,
    },
    Mean,
}

impl ReplicaAggregate {
    /// Aggregate value and its gradient with respect to the block.
    fn apply(self, w: &[f64]) -> (f64, Vec<f64>) {
        let k = w.len() as f64;
        match self {
            ReplicaAggregate::SmoothMax { beta } => {
                let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = w.iter().map(|v| (beta * (v - m)).exp()).collect();
                let sum: f64 = e.iter().sum();
                let value = m + (sum / k).ln() / beta;
                (value.clamp(0.0, 1.0), e.iter().map(|v| v / sum).collect())
            }
            ReplicaAggregate::Mean => (w.iter().sum::<f64>() / k, vec![1.0 / k; w.len()]),
        }
    }
}

/// A base objective over `n0` inputs with input `b` replicated `counts[b]`
/// times.
#[derive(Clone)]
pub struct ReplicationSpec {
    pub base: Arc<dyn Objective>,
    pub counts: Vec<usize>,
    pub aggregate: ReplicaAggregate,
}

/// The expanded objective; replicas of one base input are contiguous.
#[derive(Clone)]
pub struct ReplicatedObjective {
    spec: ReplicationSpec,
    /// Expanded index range of each block.
    blocks: Vec<std::ops::Range<usize>>,
    n: usize,
}

pub fn replicate_features(spec: ReplicationSpec) -> Result<ReplicatedObjective> {
    if spec.counts.len() != spec.base.dim() {
        return Err(Error::dims("replica counts", spec.base.dim(), spec.counts.len()));
    }
    if spec.counts.contains(&0) {
        return Err(Error::InvalidConfig("every replica count must be positive".into()));
    }
    if let ReplicaAggregate::SmoothMax { beta } = spec.aggregate {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::range("smooth-max temperature beta", beta, "(0, inf)"));
        }
    }
    let mut blocks = Vec::with_capacity(spec.counts.len());
    let mut start = 0;
    for &c in &spec.counts {
        blocks.push(start..start + c);
        start += c;
    }
    Ok(ReplicatedObjective { spec, blocks, n: start })
}

impl ReplicatedObjective {
    pub fn blocks(&self) -> &[std::ops::Range<usize>] {
        &self.blocks
    }

    /// Block of expanded feature `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(&i))
            .expect("index inside the expanded dimension")
    }

    /// The set function with each block collapsed by an exact `max`:
    /// a block is present when any of its replicas is.
    pub fn hard_max_view(&self) -> HardMaxView<'_> {
        HardMaxView { objective: self }
    }
}

impl Objective for ReplicatedObjective {
    fn dim(&self) -> usize {
        self.n
    }

    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_mask(s, self.n)?;
        let parts: Vec<(f64, Vec<f64>)> = self
            .blocks
            .iter()
            .map(|b| self.spec.aggregate.apply(&s[b.clone()]))
            .collect();
        let u: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let (value, du) = self.spec.base.value_and_gradient(&u)?;
        let mut grad = vec![0.0; self.n];
        for ((b, (_, dagg)), g) in self.blocks.iter().zip(&parts).zip(&du) {
            for (i, d) in b.clone().zip(dagg) {
                grad[i] = g * d;
            }
        }
        Ok((value, grad))
    }

    fn description(&self) -> String {
        format!(
            "replicated ({:?}, counts {:?}) of: {}",
            self.spec.aggregate,
            self.spec.counts,
            self.spec.base.description()
        )
    }
}

pub struct HardMaxView<'a> {
    objective: &'a ReplicatedObjective,
}

impl SetFunction for HardMaxView<'_> {
    fn ground_size(&self) -> usize {
        self.objective.n
    }

    fn eval_set(&self, set: &[usize]) -> Result<f64> {
        let mut u = vec![0.0; self.objective.blocks.len()];
        for &i in set {
            if i >= self.objective.n {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    n: self.objective.n,
                });
            }
            u[self.objective.block_of(i)] = 1.0;
        }
        self.objective.spec.base.value(&u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedLinRegSpec {
    pub n: usize,
    pub rows: usize,
    /// `(a, b)`: column `b` is built to have correlation `rho` with column `a`.
    pub pairs: Vec<(usize, usize)>,
    pub rho: f64,
    /// Response coefficients on the raw columns; all ones when empty.
    pub coefficients: Vec<f64>,
    pub noise_std: f64,
    pub seed: u64,
}

impl CorrelatedLinRegSpec {
    pub fn new(n: usize, pairs: Vec<(usize, usize)>, rho: f64, seed: u64) -> Self {
        Self {
            n,
            rows: 200,
            pairs,
            rho,
            coefficients: vec![],
            noise_std: 0.1,
            seed,
        }
    }
}

/// Gaussian design with correlated column pairs. The response
/// `y = sum_j c_j X_j + noise` is planted on the raw columns, which are then
/// scaled to unit Euclidean norm.
pub fn make_correlated_linreg(spec: &CorrelatedLinRegSpec) -> Result<LinRegProblem> {
    let (n, m) = (spec.n, spec.rows);
    if !(spec.rho.abs() < 1.0) {
        return Err(Error::range("correlation rho", spec.rho, "(-1, 1)"));
    }
    if n == 0 || m == 0 {
        return Err(Error::Empty(format!("{m}x{n} design")));
    }
    for &(a, b) in &spec.pairs {
        if a >= n || b >= n || a == b {
            return Err(Error::InvalidConfig(format!(
                "bad correlated pair ({a}, {b}) for n = {n}"
            )));
        }
    }
    let coefficients = if spec.coefficients.is_empty() {
        vec![1.0; n]
    } else if spec.coefficients.len() == n {
        spec.coefficients.clone()
    } else {
        return Err(Error::dims("response coefficients", n, spec.coefficients.len()));
    };
    let mut rng = substream(spec.seed, "correlated-linreg");
    let mut x = DMatrix::from_fn(m, n, |_, _| normal(&mut rng));
    let tail = (1.0 - spec.rho * spec.rho).sqrt();
    for &(a, b) in &spec.pairs {
        let mixed = x.column(a) * spec.rho + x.column(b) * tail;
        x.set_column(b, &mixed);
    }
    let noise = DVector::from_fn(m, |_, _| normal(&mut rng) * spec.noise_std);
    let y = &x * DVector::from_vec(coefficients) + noise;
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    linreg_solve(x, y)
}

/// `x* . (A^T b)`: the exact integrated gradients of the linear-regression
/// objective (half its gradient at zero).
pub fn closed_form_pig_linreg(problem: &LinRegProblem) -> Vec<f64> {
    let atb = problem.design().transpose() * problem.targets();
    problem.solution().iter().zip(atb.iter()).map(|(x, a)| x * a).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTabularSpec {
    pub n_features: usize,
    pub k_informative: usize,
    pub n_rows: usize,
    pub noise_std: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PlantedTabularSpec {
    fn default() -> Self {
        Self {
            n_features: 30,
            k_informative: 5,
            n_rows: 4096,
            noise_std: 0.5,
            batch_size: 64,
            seed: 7,
        }
    }
}

/// Standard normal features; binary labels `1[sum_{i in P} w_i x_i + noise > 0]`
/// over a planted set `P` with `|w_i|` in `[1, 2]` and random signs. Returns
/// the dataset and the sorted planted set.
pub fn make_planted_tabular(spec: &PlantedTabularSpec) -> Result<(TabularDataset, Vec<usize>)> {
    if spec.k_informative > spec.n_features {
        return Err(Error::InvalidConfig(format!(
            "k_informative ({}) exceeds n_features ({})",
            spec.k_informative, spec.n_features
        )));
    }
    if !(spec.noise_std >= 0.0) {
        return Err(Error::range("noise_std", spec.noise_std, "[0, inf)"));
    }
    let mut rng = substream(spec.seed, "planted-tabular");
    let mut planted = sample(&mut rng, spec.n_features, spec.k_informative).into_vec();
    planted.sort_unstable();
    let weights: Vec<f64> = planted
        .iter()
        .map(|_| {
            let magnitude = rng.random_range(1.0..=2.0);
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    let rows = DMatrix::from_fn(spec.n_rows, spec.n_features, |_, _| normal(&mut rng));
    let labels = (0..spec.n_rows)
        .map(|r| {
            let logit: f64 = planted.iter().zip(&weights).map(|(&j, w)| w * rows[(r, j)]).sum();
            f64::from(u8::from(logit + spec.noise_std * normal(&mut rng) > 0.0))
        })
        .collect();
    let names = (0..spec.n_features).map(|j| format!("x{j}")).collect();
    let data = TabularDataset::new(names, rows, labels, spec.batch_size)?;
    Ok((data, planted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Distance of each block's feature mean from the origin, in units of
    /// the unit-variance feature noise.
    pub feature_signal: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SbmSpec {
    fn default() -> Self {
        Self {
            sizes: vec![60, 60],
            p_in: 0.2,
            p_out: 0.02,
            feature_dim: 8,
            feature_signal: 0.6,
            train_fraction: 0.5,
            seed: 11,
        }
    }
}

/// Stochastic block model: edges within a block with probability `p_in`,
/// across blocks with `p_out`; node features are the block mean plus unit
/// Gaussian noise; labels are block ids; a seeded random train/test split.
pub fn make_sbm_graph(spec: &SbmSpec) -> Result<SparseGraph> {
    if spec.sizes.is_empty() || spec.sizes.contains(&0) {
        return Err(Error::Empty("every SBM block needs at least one node".into()));
    }
    for (what, p) in [
        ("p_in", spec.p_in),
        ("p_out", spec.p_out),
        ("train_fraction", spec.train_fraction),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::range(what, p, "[0, 1]"));
        }
    }
    if spec.feature_dim == 0 {
        return Err(Error::InvalidConfig("feature_dim must be positive".into()));
    }
    let labels: Vec<usize> = spec
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let m = labels.len();

    let mut rng = substream(spec.seed, "sbm-edges");
    let mut edges = Vec::new();
    for u in 0..m {
        for v in (u + 1)..m {
            let p = if labels[u] == labels[v] { spec.p_in } else { spec.p_out };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }

    let mut rng = substream(spec.seed, "sbm-features");
    let means: Vec<Vec<f64>> = spec
        .sizes
        .iter()
        .map(|_| {
            let dir: Vec<f64> = (0..spec.feature_dim).map(|_| normal(&mut rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            dir.iter().map(|v| v / norm * spec.feature_signal).collect()
        })
        .collect();
    let features = DMatrix::from_fn(m, spec.feature_dim, |i, j| means[labels[i]][j]);
    let features = features + DMatrix::from_fn(m, spec.feature_dim, |_, _| normal(&mut rng));

    let mut nodes: Vec<usize> = (0..m).collect();
    nodes.shuffle(&mut substream(spec.seed, "sbm-split"));
    let cut = (spec.train_fraction * m as f64).round() as usize;
    let mut train = nodes[..cut].to_vec();
    let mut test = nodes[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    SparseGraph::new(EdgeIndex::new(m, edges)?, features, labels, NodeSplit { train, test })
}
