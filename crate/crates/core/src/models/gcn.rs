//! Three-layer graph convolutional network
//! `softmax(A relu(A relu(A X T1) T2) T3)` over a normalized adjacency `A`.

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, NormalizedAdjacency, SparseGraph};
use crate::models::mlp::{accuracy, argmax, cross_entropy, TrainConfig, Trained};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TinyGcn {
    theta: [DMatrix<f64>; 3],
    trained: bool,
}

/// Intermediate products of one forward pass.
#[derive(Debug, Clone)]
pub struct GcnTrace {
    /// `X T1`, `H1 T2`, `H2 T3`.
    pub projected: [DMatrix<f64>; 3],
    /// `A projected[0]`, `A projected[1]` (pre-activation).
    pub pre_activation: [DMatrix<f64>; 2],
    pub hidden: [DMatrix<f64>; 2],
    pub logits: DMatrix<f64>,
}

pub struct GcnGrads {
    pub theta: Option<[DMatrix<f64>; 3]>,
    /// `dL / dA` on the support of the adjacency.
    pub adjacency: Option<Vec<f64>>,
}

impl TinyGcn {
    pub fn new(feature_dim: usize, hidden: [usize; 2], classes: usize, rng: &mut Rng) -> Result<Self> {
        let dims = [feature_dim, hidden[0], hidden[1], classes];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("GCN dims {dims:?} must be positive")));
        }
        let mut layer = |fan_in: usize, fan_out: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            DMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..=bound))
        };
        let theta = [
            layer(dims[0], dims[1]),
            layer(dims[1], dims[2]),
            layer(dims[2], dims[3]),
        ];
        Ok(Self { theta, trained: false })
    }

    pub fn from_thetas(theta: [DMatrix<f64>; 3], trained: bool) -> Result<Self> {
        if theta[0].ncols() != theta[1].nrows() || theta[1].ncols() != theta[2].nrows() {
            return Err(Error::dims("GCN weight chain", theta[0].ncols(), theta[1].nrows()));
        }
        Ok(Self { theta, trained })
    }

    pub fn thetas(&self) -> &[DMatrix<f64>; 3] {
        &self.theta
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn feature_dim(&self) -> usize {
        self.theta[0].nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.theta[2].ncols()
    }

    pub fn dims(&self) -> [usize; 4] {
        [
            self.theta[0].nrows(),
            self.theta[1].nrows(),
            self.theta[2].nrows(),
            self.theta[2].ncols(),
        ]
    }

    /// Forward pass from precomputed `X T1`.
    pub fn forward_projected(&self, adj: &NormalizedAdjacency, xt1: &DMatrix<f64>) -> GcnTrace {
        let m1 = adj.matmul(xt1);
        let h1 = m1.map(|v| v.max(0.0));
        let u2 = &h1 * &self.theta[1];
        let m2 = adj.matmul(&u2);
        let h2 = m2.map(|v| v.max(0.0));
        let u3 = &h2 * &self.theta[2];
        let logits = adj.matmul(&u3);
        GcnTrace {
            projected: [xt1.clone(), u2, u3],
            pre_activation: [m1, m2],
            hidden: [h1, h2],
            logits,
        }
    }

    pub fn project_features(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.ncols() != self.feature_dim() {
            return Err(Error::dims("node features", self.feature_dim(), features.ncols()));
        }
        Ok(features * &self.theta[0])
    }

    pub fn forward(&self, adj: &NormalizedAdjacency, features: &DMatrix<f64>) -> Result<GcnTrace> {
        if features.nrows() != adj.num_nodes() {
            return Err(Error::dims("feature rows", adj.num_nodes(), features.nrows()));
        }
        Ok(self.forward_projected(adj, &self.project_features(features)?))
    }

    /// Reverse pass from `dL / d logits`.
    pub fn backward(
        &self,
        adj: &NormalizedAdjacency,
        features: &DMatrix<f64>,
        trace: &GcnTrace,
        dlogits: &DMatrix<f64>,
        want_theta: bool,
        want_adjacency: bool,
    ) -> GcnGrads {
        let mut entry = want_adjacency.then(|| vec![0.0; adj.nnz()]);

        // logits = A U3
        if let Some(g) = entry.as_mut() {
            adj.accumulate_entry_grads(dlogits, &trace.projected[2], g);
        }
        let du3 = adj.matmul(dlogits);
        let dt3 = want_theta.then(|| trace.hidden[1].transpose() * &du3);
        let mut dm2 = du3 * self.theta[2].transpose();
        dm2.zip_apply(&trace.pre_activation[1], |d, m| {
            if m <= 0.0 {
                *d = 0.0;
            }
        });

        // M2 = A U2
        if let Some(g) = entry.as_mut() {
            adj.accumulate_entry_grads(&dm2, &trace.projected[1], g);
        }
        let du2 = adj.matmul(&dm2);
        let dt2 = want_theta.then(|| trace.hidden[0].transpose() * &du2);
        let mut dm1 = du2 * self.theta[1].transpose();
        dm1.zip_apply(&trace.pre_activation[0], |d, m| {
            if m <= 0.0 {
                *d = 0.0;
            }
        });

        // M1 = A U1
        if let Some(g) = entry.as_mut() {
            adj.accumulate_entry_grads(&dm1, &trace.projected[0], g);
        }
        let theta = if want_theta {
            let du1 = adj.matmul(&dm1);
            let dt1 = features.transpose() * du1;
            Some([dt1, dt2.expect("requested"), dt3.expect("requested")])
        } else {
            None
        };
        GcnGrads {
            theta,
            adjacency: entry,
        }
    }

    pub fn predict(&self, adj: &NormalizedAdjacency, features: &DMatrix<f64>) -> Result<Vec<usize>> {
        let trace = self.forward(adj, features)?;
        Ok((0..trace.logits.nrows())
            .map(|i| argmax(trace.logits.row(i).iter().copied()))
            .collect())
    }

    /// Accuracy on `nodes` of the graph restricted to edges with `weights`.
    pub fn accuracy_on(&self, graph: &SparseGraph, weights: &[f64], nodes: &[usize]) -> Result<f64> {
        let adj = normalize_adjacency(graph.index(), weights)?;
        let trace = self.forward(&adj, graph.features())?;
        let rows = trace.logits.select_rows(nodes);
        let labels: Vec<usize> = nodes.iter().map(|&i| graph.labels()[i]).collect();
        Ok(accuracy(&rows, &labels))
    }
}

/// Full-batch gradient descent on the mean cross-entropy of the training
/// nodes, with every edge present.
pub fn train_gcn(gcn: TinyGcn, graph: &SparseGraph, config: &TrainConfig) -> Result<Trained<TinyGcn>> {
    let train = graph.train_nodes();
    if train.is_empty() {
        return Err(Error::Empty("graph has no training nodes".into()));
    }
    let adj = normalize_adjacency(graph.index(), &vec![1.0; graph.num_edges()])?;
    let features = graph.features();
    let labels: Vec<usize> = train.iter().map(|&i| graph.labels()[i]).collect();

    let mut gcn = gcn;
    let loss_of = |gcn: &TinyGcn, want: bool| -> Result<(f64, Option<DMatrix<f64>>, GcnTrace)> {
        let trace = gcn.forward(&adj, features)?;
        let rows = trace.logits.select_rows(train);
        let (loss, grad) = cross_entropy(&rows, &labels, want)?;
        let full = grad.map(|g| {
            let mut d = DMatrix::zeros(trace.logits.nrows(), trace.logits.ncols());
            for (r, &node) in train.iter().enumerate() {
                d.row_mut(node).copy_from(&g.row(r));
            }
            d
        });
        Ok((loss, full, trace))
    };
    for epoch in 0..config.epochs {
        let (loss, dlogits, trace) = loss_of(&gcn, true)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let grads = gcn.backward(&adj, features, &trace, &dlogits.expect("requested"), true, false);
        for (t, g) in gcn.theta.iter_mut().zip(grads.theta.expect("requested").iter()) {
            *t -= g * config.learning_rate;
        }
    }
    let (final_loss, _, _) = loss_of(&gcn, false)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    gcn.trained = true;
    Ok(Trained { model: gcn, final_loss })
}
