//! Undirected graphs with per-edge weights and the symmetric normalization
//! `(D + I)^{-1/2} (W + I) (D + I)^{-1/2}`, where `D` holds the row sums of
//! the weighted adjacency `W`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Node-indexed neighbour lists with the id of the connecting edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeIndex {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    ptr: Vec<usize>,
    nbr: Vec<(usize, usize)>,
}

impl EdgeIndex {
    /// Canonicalizes every pair to `(min, max)`, sorts and deduplicates.
    /// Self-loops are rejected: normalization adds them itself.
    pub fn new(num_nodes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = Vec::new();
        for (u, v) in pairs {
            let hi = u.max(v);
            if hi >= num_nodes {
                return Err(Error::IndexOutOfRange {
                    index: hi,
                    n: num_nodes,
                });
            }
            if u == v {
                return Err(Error::InvalidConfig(format!("self-loop on node {u}")));
            }
            edges.push((u.min(v), hi));
        }
        edges.sort_unstable();
        edges.dedup();

        let mut deg = vec![0usize; num_nodes];
        for &(u, v) in &edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut ptr = vec![0usize; num_nodes + 1];
        for i in 0..num_nodes {
            ptr[i + 1] = ptr[i] + deg[i];
        }
        let mut fill = ptr.clone();
        let mut nbr = vec![(0, 0); ptr[num_nodes]];
        for (e, &(u, v)) in edges.iter().enumerate() {
            nbr[fill[u]] = (v, e);
            fill[u] += 1;
            nbr[fill[v]] = (u, e);
            fill[v] += 1;
        }
        for i in 0..num_nodes {
            nbr[ptr[i]..ptr[i + 1]].sort_unstable();
        }
        Ok(Self {
            num_nodes,
            edges,
            ptr,
            nbr,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(neighbour, edge id)` pairs of `node`, by neighbour.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.nbr[self.ptr[node]..self.ptr[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.ptr[node + 1] - self.ptr[node]
    }

    /// Nodes within `hops` of `source` (breadth first, `source` included).
    pub fn within_hops(&self, source: usize, hops: usize) -> Vec<bool> {
        let mut seen = vec![false; self.num_nodes];
        seen[source] = true;
        let mut frontier = vec![source];
        for _ in 0..hops {
            let mut next = Vec::new();
            for &u in &frontier {
                for &(v, _) in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        seen
    }

    pub fn to_dense(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.num_nodes, self.num_nodes);
        for (&(u, v), &s) in self.edges.iter().zip(weights) {
            w[(u, v)] = s;
            w[(v, u)] = s;
        }
        w
    }
}

/// Normalized adjacency in compressed-row form. The support always holds
/// every diagonal entry and both directions of every edge, even when the
/// edge weight is zero, so gradients with respect to the weights are
/// available everywhere.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    /// Edge id of each entry; `None` on the diagonal.
    edge_of: Vec<Option<usize>>,
    /// `1 + sum_j W_ij`.
    degree: Vec<f64>,
    inv_sqrt_degree: Vec<f64>,
}

/// Sparse normalization of the graph weighted by `weights` (one per edge).
pub fn normalize_adjacency(index: &EdgeIndex, weights: &[f64]) -> Result<NormalizedAdjacency> {
    if weights.len() != index.num_edges() {
        return Err(Error::dims("edge weights", index.num_edges(), weights.len()));
    }
    for (edge, &weight) in weights.iter().enumerate() {
        if !(weight >= 0.0) {
            return Err(Error::NegativeWeight { edge, weight });
        }
    }
    let n = index.num_nodes();
    let degree: Vec<f64> = (0..n)
        .map(|i| 1.0 + index.neighbors(i).iter().map(|&(_, e)| weights[e]).sum::<f64>())
        .collect();
    let inv_sqrt_degree: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

    let nnz = n + 2 * index.num_edges();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col = Vec::with_capacity(nnz);
    let mut val = Vec::with_capacity(nnz);
    let mut edge_of = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for i in 0..n {
        col.push(i);
        val.push(inv_sqrt_degree[i] * inv_sqrt_degree[i]);
        edge_of.push(None);
        for &(j, e) in index.neighbors(i) {
            col.push(j);
            val.push(weights[e] * inv_sqrt_degree[i] * inv_sqrt_degree[j]);
            edge_of.push(Some(e));
        }
        row_ptr.push(col.len());
    }
    Ok(NormalizedAdjacency {
        n,
        row_ptr,
        col,
        val,
        edge_of,
        degree,
        inv_sqrt_degree,
    })
}

/// Dense normalization of a symmetric, nonnegative weighted adjacency.
pub fn normalize_dense(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::dims("adjacency columns", n, w.ncols()));
    }
    for i in 0..n {
        for j in 0..n {
            if !(w[(i, j)] >= 0.0) {
                return Err(Error::NegativeWeight {
                    edge: i * n + j,
                    weight: w[(i, j)],
                });
            }
        }
    }
    let d: Vec<f64> = (0..n).map(|i| 1.0 + w.row(i).sum()).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let a = w[(i, j)] + f64::from(u8::from(i == j));
        a / (d[i] * d[j]).sqrt()
    }))
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[(i, self.col[k])] += self.val[k];
            }
        }
        a
    }

    /// `A_hat * h`.
    pub fn matmul(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(h.nrows(), self.n, "row count must match node count");
        let mut out = DMatrix::zeros(self.n, h.ncols());
        for c in 0..h.ncols() {
            let src = h.column(c);
            let mut dst = out.column_mut(c);
            for i in 0..self.n {
                let mut acc = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.val[k] * src[self.col[k]];
                }
                dst[i] = acc;
            }
        }
        out
    }

    /// Adds `<upstream_i, input_j>` to `grads[k]` for every support entry
    /// `k = (i, j)`: the gradient of `A_hat * input` with respect to
    /// `A_hat`, restricted to the support.
    pub fn accumulate_entry_grads(&self, upstream: &DMatrix<f64>, input: &DMatrix<f64>, grads: &mut [f64]) {
        let up = upstream.transpose();
        let inp = input.transpose();
        for i in 0..self.n {
            let ui = up.column(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                grads[k] += ui.dot(&inp.column(self.col[k]));
            }
        }
    }

    /// Directed gradient `M_ij = dL / dW_ij` on the support from the entry
    /// gradients `dL / dA_hat`, with degrees recomputed from `W`. Returns
    /// `(i, j, M_ij)` for every off-diagonal support entry.
    pub fn directed_weight_gradient(&self, entry_grads: &[f64]) -> Vec<(usize, usize, f64)> {
        let dd = self.degree_gradient(entry_grads);
        let mut out = Vec::with_capacity(self.nnz() - self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k];
                if self.edge_of[k].is_some() {
                    let direct = entry_grads[k] * self.inv_sqrt_degree[i] * self.inv_sqrt_degree[j];
                    out.push((i, j, direct + dd[i]));
                }
            }
        }
        out
    }

    /// `dL / ds_e` for the shared per-edge weight `s_e = W_uv = W_vu`:
    /// the sum `M_uv + M_vu` of the two directed contributions.
    pub fn edge_gradient(&self, entry_grads: &[f64], num_edges: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_edges];
        for (i, j, m) in self.directed_weight_gradient(entry_grads) {
            let k = self.position(i, j).expect("entry is on the support");
            let e = self.edge_of[k].expect("off-diagonal entry");
            out[e] += m;
        }
        out
    }

    /// `dL / d degree_i` through every entry that depends on it.
    fn degree_gradient(&self, entry_grads: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let t = self.val[k] * entry_grads[k];
                acc[i] += t;
                acc[self.col[k]] += t;
            }
        }
        acc.iter().zip(&self.degree).map(|(a, d)| -a / (2.0 * d)).collect()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        // Diagonal first, then neighbours in ascending order.
        if j == i {
            return Some(self.row_ptr[i]);
        }
        row[1..].binary_search(&j).ok().map(|p| self.row_ptr[i] + 1 + p)
    }
}

/// `(M + M^T) / 2`.
pub fn symmetrize_gradient(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
