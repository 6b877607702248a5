//! Fully connected ReLU network with a softmax output layer.
//!
//! Batches are `N x d` matrices, one example per row. Layer `l` stores its
//! weights as an `out x in` matrix, so `z = a W^T + b`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::dataset::TabularDataset;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxNet {
    layers: Vec<DenseLayer>,
}

/// Activations recorded by a batch forward pass: `activations[0]` is the
/// input, `activations[l + 1]` the output of layer `l` (post-ReLU for hidden
/// layers, logits for the last).
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<DMatrix<f64>>,
}

impl Trace {
    pub fn logits(&self) -> &DMatrix<f64> {
        self.activations.last().expect("trace holds at least the input")
    }
}

/// Parameter gradients, one `(weights, bias)` pair per layer.
pub type ParamGrads = Vec<(DMatrix<f64>, DVector<f64>)>;

impl SoftmaxNet {
    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases.
    pub fn new(layer_dims: &[usize], rng: &mut Rng) -> Result<Self> {
        check_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                DenseLayer {
                    weights: DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..=bound)),
                    bias: DVector::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| DenseLayer {
                weights: DMatrix::zeros(w[1], w[0]),
                bias: DVector::zeros(w[1]),
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::dims(format!("layer {i} bias"), l.outputs(), l.bias.len()));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::dims(
                    format!("layer {i} input"),
                    layers[i - 1].outputs(),
                    l.inputs(),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs())
            .chain(self.layers.iter().map(DenseLayer::outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::outputs)
    }

    pub fn forward_batch(&self, inputs: DMatrix<f64>) -> Result<Trace> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::dims("network input", self.input_dim(), inputs.ncols()));
        }
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &activations[l] * layer.weights.transpose();
            for (mut col, &b) in z.column_iter_mut().zip(layer.bias.iter()) {
                col.add_scalar_mut(b);
            }
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            activations.push(z);
        }
        Ok(Trace { activations })
    }

    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = DMatrix::from_row_slice(1, input.len(), input);
        Ok(self.forward_batch(x)?.logits().iter().copied().collect())
    }

    /// Class probabilities for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(input)?))
    }

    /// Reverse pass from `d loss / d logits` (same shape as the logits).
    /// Returns the input gradient and, when `want_params`, the parameter
    /// gradients. The ReLU derivative at exactly zero is zero.
    pub fn backward_batch(
        &self,
        trace: &Trace,
        dlogits: DMatrix<f64>,
        want_params: bool,
    ) -> Result<(DMatrix<f64>, Option<ParamGrads>)> {
        let logits = trace.logits();
        if dlogits.shape() != logits.shape() {
            return Err(Error::dims(
                "upstream gradient columns",
                logits.ncols(),
                dlogits.ncols(),
            ));
        }
        let mut params = want_params.then(|| Vec::with_capacity(self.layers.len()));
        let mut delta = dlogits;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.activations[l];
            if let Some(p) = params.as_mut() {
                let dw = delta.transpose() * input;
                let db = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.iter().sum::<f64>()));
                p.push((dw, db));
            }
            let mut dinput = &delta * &layer.weights;
            if l > 0 {
                dinput.zip_apply(input, |d, a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = dinput;
        }
        if let Some(p) = params.as_mut() {
            p.reverse();
        }
        Ok((delta, params))
    }

    /// Input gradient of a loss whose gradient with respect to the logits is
    /// `upstream`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.num_classes() {
            return Err(Error::dims("upstream gradient", self.num_classes(), upstream.len()));
        }
        let trace = self.forward_batch(DMatrix::from_row_slice(1, input.len(), input))?;
        let d = DMatrix::from_row_slice(1, upstream.len(), upstream);
        let (dx, _) = self.backward_batch(&trace, d, false)?;
        Ok(dx.iter().copied().collect())
    }

    fn apply_step(&mut self, grads: &ParamGrads, lr: f64) {
        for (layer, (dw, db)) in self.layers.iter_mut().zip(grads) {
            layer.weights -= dw * lr;
            layer.bias.axpy(-lr, db, 1.0);
        }
    }

    /// Mean cross-entropy and accuracy on a labelled batch.
    pub fn evaluate(&self, rows: &DMatrix<f64>, labels: &[usize]) -> Result<(f64, f64)> {
        let trace = self.forward_batch(rows.clone())?;
        let (loss, _) = cross_entropy(trace.logits(), labels, false)?;
        Ok((loss, accuracy(trace.logits(), labels)))
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "layer dims {layer_dims:?} need at least two positive entries"
        )));
    }
    Ok(())
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Mean cross-entropy of integer labels under row-wise softmax of `logits`,
/// with `d loss / d logits` when requested.
pub fn cross_entropy(logits: &DMatrix<f64>, labels: &[usize], want_grad: bool) -> Result<(f64, Option<DMatrix<f64>>)> {
    let (n, c) = logits.shape();
    if labels.len() != n {
        return Err(Error::dims("labels", n, labels.len()));
    }
    if n == 0 {
        return Err(Error::Empty("cross-entropy over zero rows".into()));
    }
    let mut grad = want_grad.then(|| DMatrix::zeros(n, c));
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::IndexOutOfRange { index: y, n: c });
        }
        let row: Vec<f64> = logits.row(i).iter().copied().collect();
        let logp = log_softmax(&row);
        loss -= logp[y];
        if let Some(g) = grad.as_mut() {
            for (j, lp) in logp.iter().enumerate() {
                g[(i, j)] = (lp.exp() - f64::from(u8::from(j == y))) / n as f64;
            }
        }
    }
    Ok((loss / n as f64, grad))
}

pub fn accuracy(logits: &DMatrix<f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax(logits.row(i).iter().copied()) == y)
        .count();
    hits as f64 / labels.len() as f64
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    /// Training loss of the returned model.
    pub final_loss: f64,
}

/// Full-batch gradient descent on mean cross-entropy.
pub fn train_mlp(net: SoftmaxNet, data: &TabularDataset, config: &TrainConfig) -> Result<Trained<SoftmaxNet>> {
    if data.is_empty() {
        return Err(Error::Empty("training dataset has no rows".into()));
    }
    let labels = data.class_labels()?;
    let rows = data.rows().clone();
    let mut net = net;
    for epoch in 0..config.epochs {
        let trace = net.forward_batch(rows.clone())?;
        let (loss, grad) = cross_entropy(trace.logits(), &labels, true)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let (_, params) = net.backward_batch(&trace, grad.expect("requested"), true)?;
        net.apply_step(&params.expect("requested"), config.learning_rate);
    }
    let (final_loss, _) = net.evaluate(&rows, &labels)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    Ok(Trained { model: net, final_loss })
}
