//! The edge-mask objective: mean log-likelihood of the true labels of target
//! nodes under a GCN run on the graph with edge weights `s`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{normalize_adjacency, SparseGraph};
use crate::error::{Error, Result};
use crate::models::gcn::TinyGcn;
use crate::models::mlp::cross_entropy;
use crate::objective::Objective;
use crate::path::check_mask;

/// Hop radius of single-node explanations: a three-layer GCN sees exactly
/// this neighbourhood.
pub const EXPLANATION_HOPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnnTarget {
    /// Every training node, with its true label.
    AllTrain,
    /// Every node, labelled with the full-graph prediction of the GCN: the
    /// objective rewards edge subsets that preserve the model's output.
    AllNodes,
    /// One node; gradients are restricted to its 3-hop neighbourhood.
    Node(usize),
}

impl std::str::FromStr for GnnTarget {
    type Err = Error;

    /// `all-train`, `all-nodes` or `node:<id>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-train" => Ok(GnnTarget::AllTrain),
            "all-nodes" => Ok(GnnTarget::AllNodes),
            _ => s
                .strip_prefix("node:")
                .and_then(|v| v.parse().ok())
                .map(GnnTarget::Node)
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "unknown GCN target '{s}' (expected all-train, all-nodes or node:<id>)"
                    ))
                }),
        }
    }
}

pub struct GnnEdgeObjective {
    gcn: TinyGcn,
    graph: SparseGraph,
    target: GnnTarget,
    nodes: Vec<usize>,
    labels: Vec<usize>,
    /// `X T1`, which does not depend on the mask.
    projected: DMatrix<f64>,
    /// Edges that may carry gradient (single-node targets only).
    support: Option<Vec<bool>>,
}

pub fn gnn_edge_objective(gcn: TinyGcn, graph: SparseGraph, target: GnnTarget) -> Result<GnnEdgeObjective> {
    if !gcn.is_trained() {
        return Err(Error::Untrained(
            "the edge objective explains a trained GCN; train it first".into(),
        ));
    }
    let nodes = match target {
        GnnTarget::AllTrain => graph.train_nodes().to_vec(),
        GnnTarget::AllNodes => (0..graph.num_nodes()).collect(),
        GnnTarget::Node(v) if v < graph.num_nodes() => vec![v],
        GnnTarget::Node(v) => {
            return Err(Error::IndexOutOfRange {
                index: v,
                n: graph.num_nodes(),
            })
        }
    };
    if nodes.is_empty() {
        return Err(Error::Empty("edge objective has no target nodes".into()));
    }
    if gcn.num_classes() < graph.num_classes() {
        return Err(Error::dims("GCN classes", graph.num_classes(), gcn.num_classes()));
    }
    let support = match target {
        GnnTarget::AllTrain | GnnTarget::AllNodes => None,
        GnnTarget::Node(v) => {
            let near = graph.index().within_hops(v, EXPLANATION_HOPS);
            Some(graph.edges().iter().map(|&(a, b)| near[a] && near[b]).collect())
        }
    };
    let labels = match target {
        GnnTarget::AllNodes => {
            let full = normalize_adjacency(graph.index(), &vec![1.0; graph.num_edges()])?;
            gcn.predict(&full, graph.features())?
        }
        _ => nodes.iter().map(|&i| graph.labels()[i]).collect(),
    };
    let projected = gcn.project_features(graph.features())?;
    Ok(GnnEdgeObjective {
        gcn,
        graph,
        target,
        nodes,
        labels,
        projected,
        support,
    })
}

impl GnnEdgeObjective {
    pub fn graph(&self) -> &SparseGraph {
        &self.graph
    }

    pub fn gcn(&self) -> &TinyGcn {
        &self.gcn
    }

    pub fn target(&self) -> GnnTarget {
        self.target
    }

    /// Edges that can receive nonzero gradient.
    pub fn gradient_support(&self) -> Option<&[bool]> {
        self.support.as_deref()
    }

    fn run(&self, s: &[f64], want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        check_mask(s, self.dim())?;
        let adj = normalize_adjacency(self.graph.index(), s)?;
        let trace = self.gcn.forward_projected(&adj, &self.projected);
        let rows = trace.logits.select_rows(&self.nodes);
        let (loss, grad) = cross_entropy(&rows, &self.labels, want_grad)?;
        let Some(grad) = grad else {
            return Ok((-loss, None));
        };
        // Maximizing log-likelihood: the upstream gradient is -dCE/dlogits.
        let mut dlogits = DMatrix::zeros(trace.logits.nrows(), trace.logits.ncols());
        for (r, &node) in self.nodes.iter().enumerate() {
            for c in 0..grad.ncols() {
                dlogits[(node, c)] -= grad[(r, c)];
            }
        }
        let grads = self
            .gcn
            .backward(&adj, self.graph.features(), &trace, &dlogits, false, true);
        let entry = grads.adjacency.expect("requested");
        let mut edge_grad = adj.edge_gradient(&entry, self.dim());
        if let Some(support) = &self.support {
            for (g, &keep) in edge_grad.iter_mut().zip(support) {
                if !keep {
                    *g = 0.0;
                }
            }
        }
        Ok((-loss, Some(edge_grad)))
    }
}

impl Objective for GnnEdgeObjective {
    fn dim(&self) -> usize {
        self.graph.num_edges()
    }

    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.run(s, true)?;
        Ok((v, g.expect("requested")))
    }

    fn value(&self, s: &[f64]) -> Result<f64> {
        Ok(self.run(s, false)?.0)
    }

    fn description(&self) -> String {
        match self.target {
            GnnTarget::AllTrain => format!(
                "GCN edge objective: mean log-likelihood of {} training nodes over {} edges",
                self.nodes.len(),
                self.dim()
            ),
            GnnTarget::AllNodes => format!(
                "GCN edge objective: mean log-likelihood of the full-graph predictions of {} nodes over {} edges",
                self.nodes.len(),
                self.dim()
            ),
            GnnTarget::Node(v) => format!(
                "GCN edge objective: log-likelihood of node {v} over {} edges",
                self.dim()
            ),
        }
    }
}
