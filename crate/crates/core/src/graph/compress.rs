//! Graph compression: keep a fraction of the edges and measure how much test
//! accuracy the GCN retains.

use serde::{Deserialize, Serialize};

use super::SparseGraph;
use crate::error::{Error, Result};
use crate::models::gcn::TinyGcn;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Uniform,
    /// Probability proportional to `(D_uu D_vv)^(-1/2)`.
    DegreeWeighted,
}

/// How the kept edges are chosen at each ratio.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeSelector {
    /// Random edges drawn from `seed`.
    Sampler { kind: SamplerKind, seed: u64 },
    /// The first edges of an attribution ranking.
    Ranked { name: String, order: Vec<usize> },
}

impl EdgeSelector {
    pub fn name(&self) -> &str {
        match self {
            EdgeSelector::Sampler {
                kind: SamplerKind::Uniform,
                ..
            } => "random",
            EdgeSelector::Sampler {
                kind: SamplerKind::DegreeWeighted,
                ..
            } => "degree_weighted",
            EdgeSelector::Ranked { name, .. } => name,
        }
    }

    /// Edge ids kept at `ratio`.
    pub fn select(&self, graph: &SparseGraph, ratio: f64) -> Result<Vec<usize>> {
        match self {
            EdgeSelector::Sampler { kind, seed } => baseline_edge_selector(graph, *kind, ratio, *seed),
            EdgeSelector::Ranked { order, .. } => {
                let k = edge_budget(graph.num_edges(), ratio)?;
                if order.len() < k {
                    return Err(Error::dims("edge ranking", k, order.len()));
                }
                if let Some(&bad) = order.iter().find(|&&e| e >= graph.num_edges()) {
                    return Err(Error::IndexOutOfRange {
                        index: bad,
                        n: graph.num_edges(),
                    });
                }
                Ok(order[..k].to_vec())
            }
        }
    }
}

/// `ceil(ratio * num_edges)`.
fn edge_budget(num_edges: usize, ratio: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::range("edge ratio", ratio, "[0, 1]"));
    }
    // Guard against products like 0.3 * 10 = 3.0000000000000004.
    let k = (ratio * num_edges as f64 - 1e-9).ceil().max(0.0) as usize;
    Ok(k.min(num_edges))
}

/// `ceil(ratio * |E|)` edges sampled without replacement; sorted edge ids.
pub fn baseline_edge_selector(graph: &SparseGraph, kind: SamplerKind, ratio: f64, seed: u64) -> Result<Vec<usize>> {
    let e = graph.num_edges();
    let k = edge_budget(e, ratio)?;
    let mut rng = substream(seed, "edge-selector");
    let mut picked = match kind {
        SamplerKind::Uniform => rand::seq::index::sample(&mut rng, e, k).into_vec(),
        SamplerKind::DegreeWeighted => {
            let index = graph.index();
            let weights: Vec<f64> = graph
                .edges()
                .iter()
                .map(|&(u, v)| 1.0 / ((index.degree(u) * index.degree(v)) as f64).sqrt())
                .collect();
            rand::seq::index::sample_weighted(&mut rng, e, |i| weights[i], k)
                .map_err(|err| Error::InvalidConfig(format!("weighted edge sampling: {err}")))?
                .into_vec()
        }
    };
    picked.sort_unstable();
    Ok(picked)
}

/// 0/1 edge weights with ones at `selected`.
pub fn hard_mask(selected: &[usize], num_edges: usize) -> Result<Vec<f64>> {
    crate::selection::indicator(selected, num_edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub ratio: f64,
    pub accuracy: f64,
}

/// Test accuracy of `gcn` on the subgraph kept at each ratio. The returned
/// reference is the full-graph accuracy.
pub fn compression_curve(
    gcn: &TinyGcn,
    graph: &SparseGraph,
    selector: &EdgeSelector,
    ratios: &[f64],
) -> Result<(Vec<CurvePoint>, f64)> {
    if ratios.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("ratios must be sorted ascending".into()));
    }
    let test = graph.test_nodes();
    if test.is_empty() {
        return Err(Error::Empty("graph has no test nodes".into()));
    }
    let e = graph.num_edges();
    let reference = gcn.accuracy_on(graph, &vec![1.0; e], test)?;
    let points = ratios
        .iter()
        .map(|&ratio| {
            let kept = selector.select(graph, ratio)?;
            let accuracy = gcn.accuracy_on(graph, &hard_mask(&kept, e)?, test)?;
            Ok(CurvePoint { ratio, accuracy })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, reference))
}
