//! Edge attribution for graph convolutional networks and graph compression.
//!
//! On-disk layout of a graph directory:
//!
//! * `edges.tsv`: one `u<TAB>v` pair per line, 0-indexed
//! * `features.csv`: `node_id` then numeric feature columns
//! * `labels.csv`: `node_id,label`
//! * `split.json`: `{"train": [...], "test": [...]}`

mod adjacency;
mod compress;
mod objective;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::FeatureMask;

pub use adjacency::{normalize_adjacency, normalize_dense, symmetrize_gradient, EdgeIndex, NormalizedAdjacency};
pub use compress::{baseline_edge_selector, compression_curve, hard_mask, CurvePoint, EdgeSelector, SamplerKind};
pub use objective::{gnn_edge_objective, GnnEdgeObjective, GnnTarget};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Undirected graph with node features, class labels and a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    index: EdgeIndex,
    features: DMatrix<f64>,
    labels: Vec<usize>,
    split: NodeSplit,
}

impl SparseGraph {
    pub fn new(index: EdgeIndex, features: DMatrix<f64>, labels: Vec<usize>, split: NodeSplit) -> Result<Self> {
        let m = index.num_nodes();
        if features.nrows() != m {
            return Err(Error::dims("node feature rows", m, features.nrows()));
        }
        if labels.len() != m {
            return Err(Error::dims("node labels", m, labels.len()));
        }
        for &i in split.train.iter().chain(&split.test) {
            if i >= m {
                return Err(Error::IndexOutOfRange { index: i, n: m });
            }
        }
        Ok(Self {
            index,
            features,
            labels,
            split,
        })
    }

    pub fn index(&self) -> &EdgeIndex {
        &self.index
    }

    pub fn num_nodes(&self) -> usize {
        self.index.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.index.num_edges()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        self.index.edges()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn train_nodes(&self) -> &[usize] {
        &self.split.train
    }

    pub fn test_nodes(&self) -> &[usize] {
        &self.split.test
    }

    pub fn split(&self) -> &NodeSplit {
        &self.split
    }

    /// The same nodes with a different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(
            EdgeIndex::new(self.num_nodes(), edges)?,
            self.features.clone(),
            self.labels.clone(),
            self.split.clone(),
        )
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let (features, labels) = read_nodes(&dir.join(FEATURES_FILE), &dir.join(LABELS_FILE))?;
        let m = features.nrows();
        let edges = read_edges(&dir.join(EDGES_FILE))?;
        let split_path = dir.join(SPLIT_FILE);
        let split: NodeSplit = serde_json::from_reader(
            std::fs::File::open(&split_path)
                .map_err(|e| Error::Parse(format!("cannot open split file {}: {e}", split_path.display())))?,
        )?;
        Self::new(EdgeIndex::new(m, edges)?, features, labels, split)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;

        let mut edges = std::io::BufWriter::new(std::fs::File::create(dir.join(EDGES_FILE))?);
        for &(u, v) in self.edges() {
            writeln!(edges, "{u}\t{v}")?;
        }
        edges.flush()?;

        let mut w = csv::Writer::from_path(dir.join(FEATURES_FILE))?;
        let mut header = vec!["node_id".to_string()];
        header.extend((0..self.features.ncols()).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for i in 0..self.num_nodes() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.features.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(LABELS_FILE))?;
        w.write_record(["node_id", "label"])?;
        for (i, y) in self.labels.iter().enumerate() {
            w.write_record([i.to_string(), y.to_string()])?;
        }
        w.flush()?;

        std::fs::write(dir.join(SPLIT_FILE), serde_json::to_string(&self.split)?)?;
        Ok(())
    }
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut edges = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let mut next = || -> Result<usize> {
            parts
                .next()
                .and_then(|p| p.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("{}:{}: expected u<TAB>v", path.display(), line_no + 1)))
        };
        edges.push((next()?, next()?));
    }
    Ok(edges)
}

fn read_nodes(features: &Path, labels: &Path) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let mut rdr = csv::Reader::from_path(features)?;
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::Parse(
            "features.csv needs node_id and at least one feature".into(),
        ));
    }
    let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().skip(1).map(str::parse).collect();
        let id: usize = rec[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad node_id '{}'", &rec[0])))?;
        let row = parsed.map_err(|_| Error::Parse(format!("non-numeric feature for node {id}")))?;
        if rows.insert(id, row).is_some() {
            return Err(Error::Parse(format!("node {id} listed twice in features")));
        }
    }
    let m = rows.len();
    if rows.keys().enumerate().any(|(i, &id)| i != id) {
        return Err(Error::Parse("node ids must be exactly 0..m".into()));
    }
    let d = width - 1;
    let feats = DMatrix::from_fn(m, d, |i, j| rows[&i][j]);

    let mut labs = vec![None; m];
    let mut rdr = csv::Reader::from_path(labels)?;
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad label row '{s}'")))
        };
        let id = parse(&rec[0])?;
        let y = parse(rec.get(1).unwrap_or(""))?;
        if id >= m {
            return Err(Error::IndexOutOfRange { index: id, n: m });
        }
        labs[id] = Some(y);
    }
    let labels = labs
        .into_iter()
        .enumerate()
        .map(|(i, y)| y.ok_or_else(|| Error::Parse(format!("node {i} has no label"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((feats, labels))
}

/// One mixing weight in `[0, 1]` per undirected edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask(FeatureMask);

impl EdgeMask {
    pub fn new(values: Vec<f64>, graph: &SparseGraph) -> Result<Self> {
        if values.len() != graph.num_edges() {
            return Err(Error::dims("edge mask", graph.num_edges(), values.len()));
        }
        Ok(Self(FeatureMask::new(values)?))
    }

    pub fn full(graph: &SparseGraph) -> Self {
        Self(FeatureMask::ones(graph.num_edges()))
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}
