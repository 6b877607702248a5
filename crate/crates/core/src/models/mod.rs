//! Differentiable model zoo: least squares, a softmax MLP, a three-layer GCN,
//! a full-batch trainer and finite-difference gradient checking.
//!
//! Models are stored as JSON:
//! `{"layer_dims": [...], "weights": [[row-major]...], "biases": [[...]...], "activation": "relu"}`.
//! A GCN file additionally carries `theta1`, `theta2`, `theta3` (row-major,
//! `in x out`) and a `trained` flag, with empty `weights`/`biases`.

pub mod dataset;
pub mod gcn;
pub mod gradcheck;
pub mod linreg;
pub mod mlp;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use gcn::TinyGcn;
use mlp::{DenseLayer, SoftmaxNet};

pub const ACTIVATION: &str = "relu";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta3: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trained: Option<bool>,
}

/// A model read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(SoftmaxNet),
    Gcn(TinyGcn),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::Gcn(_) => "gcn",
        }
    }

    pub fn to_file(&self) -> ModelFile {
        match self {
            Model::Mlp(net) => ModelFile {
                layer_dims: net.layer_dims(),
                weights: net.layers().iter().map(|l| row_major(&l.weights)).collect(),
                biases: net.layers().iter().map(|l| l.bias.iter().copied().collect()).collect(),
                activation: ACTIVATION.into(),
                theta1: None,
                theta2: None,
                theta3: None,
                trained: None,
            },
            Model::Gcn(gcn) => {
                let [t1, t2, t3] = gcn.thetas();
                ModelFile {
                    layer_dims: gcn.dims().to_vec(),
                    weights: vec![],
                    biases: vec![],
                    activation: ACTIVATION.into(),
                    theta1: Some(row_major(t1)),
                    theta2: Some(row_major(t2)),
                    theta3: Some(row_major(t3)),
                    trained: Some(gcn.is_trained()),
                }
            }
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.activation != ACTIVATION {
            return Err(Error::Parse(format!(
                "unsupported activation '{}' (only '{ACTIVATION}')",
                file.activation
            )));
        }
        let dims = &file.layer_dims;
        match (file.theta1, file.theta2, file.theta3) {
            (Some(t1), Some(t2), Some(t3)) => {
                if dims.len() != 4 {
                    return Err(Error::dims("GCN layer_dims", 4, dims.len()));
                }
                let theta = [
                    from_row_major(dims[0], dims[1], &t1, "theta1")?,
                    from_row_major(dims[1], dims[2], &t2, "theta2")?,
                    from_row_major(dims[2], dims[3], &t3, "theta3")?,
                ];
                Ok(Model::Gcn(TinyGcn::from_thetas(theta, file.trained.unwrap_or(false))?))
            }
            (None, None, None) => {
                let layers = dims.len().saturating_sub(1);
                if layers == 0 {
                    return Err(Error::Parse("layer_dims needs at least two entries".into()));
                }
                if file.weights.len() != layers {
                    return Err(Error::dims("weight matrices", layers, file.weights.len()));
                }
                if file.biases.len() != layers {
                    return Err(Error::dims("bias vectors", layers, file.biases.len()));
                }
                let layers = (0..layers)
                    .map(|l| {
                        let weights = from_row_major(dims[l + 1], dims[l], &file.weights[l], &format!("weights[{l}]"))?;
                        let b = &file.biases[l];
                        if b.len() != dims[l + 1] {
                            return Err(Error::dims(format!("biases[{l}]"), dims[l + 1], b.len()));
                        }
                        Ok(DenseLayer {
                            weights,
                            bias: DVector::from_column_slice(b),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Mlp(SoftmaxNet::from_layers(layers)?))
            }
            _ => Err(Error::Parse("a GCN model needs all of theta1, theta2, theta3".into())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn into_mlp(self) -> Result<SoftmaxNet> {
        match self {
            Model::Mlp(net) => Ok(net),
            Model::Gcn(_) => Err(Error::InvalidConfig("expected an MLP model, found a GCN".into())),
        }
    }

    pub fn into_gcn(self) -> Result<TinyGcn> {
        match self {
            Model::Gcn(gcn) => Ok(gcn),
            Model::Mlp(_) => Err(Error::InvalidConfig("expected a GCN model, found an MLP".into())),
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

fn from_row_major(rows: usize, cols: usize, values: &[f64], what: &str) -> Result<DMatrix<f64>> {
    if values.len() != rows * cols {
        return Err(Error::dims(what, rows * cols, values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("non-finite value in {what}")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, values))
}
