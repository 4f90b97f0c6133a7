//! Sparse graph inputs. Edge `(u, v, w)` lets node `u` aggregate from `v`,
//! i.e. it is the entry `a_uv` of row `u` of a weighted adjacency matrix.

use std::rc::Rc;

use crate::error::{NnError, Result};
use crate::matrix::Matrix;

/// Edges grouped by receiving node, with CSR-style segment offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeIndex {
    nodes: usize,
    dst: Vec<usize>,
    src: Vec<usize>,
    weight: Vec<f64>,
    offsets: Vec<usize>,
}

impl EdgeIndex {
    /// Builds the index from `(u, v, a_uv)` triples; zero weights are dropped.
    pub fn new(nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut kept: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for &(u, v, w) in edges {
            if u >= nodes || v >= nodes {
                return Err(NnError::Shape(format!("edge ({u}, {v}) outside {nodes} nodes")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(NnError::InvalidArgument(format!("edge weight {w}")));
            }
            if w > 0.0 {
                kept.push((u, v, w));
            }
        }
        kept.sort_by_key(|&(u, v, _)| (u, v));
        let mut offsets = vec![0; nodes + 1];
        for &(u, _, _) in &kept {
            offsets[u + 1] += 1;
        }
        for i in 0..nodes {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            nodes,
            dst: kept.iter().map(|e| e.0).collect(),
            src: kept.iter().map(|e| e.1).collect(),
            weight: kept.iter().map(|e| e.2).collect(),
            offsets,
        })
    }

    pub fn from_dense(adj: &Matrix) -> Result<Self> {
        if adj.rows() != adj.cols() {
            return Err(NnError::Shape("adjacency must be square".into()));
        }
        let n = adj.rows();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                edges.push((u, v, adj.get(u, v)));
            }
        }
        Self::new(n, &edges)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.dst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dst.is_empty()
    }

    pub fn dst(&self) -> &[usize] {
        &self.dst
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// Edge range received by node `u`.
    pub fn segment(&self, u: usize) -> std::ops::Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.nodes).filter(|&u| self.segment(u).is_empty()).collect()
    }

    /// Symmetric-degree normalized weights over `offdiag(A) + I`, one per
    /// edge of the returned index.
    pub fn gcn_normalized(&self) -> Result<EdgeIndex> {
        let mut edges: Vec<(usize, usize, f64)> = (0..self.len())
            .filter(|&e| self.dst[e] != self.src[e])
            .map(|e| (self.dst[e], self.src[e], self.weight[e]))
            .collect();
        edges.extend((0..self.nodes).map(|u| (u, u, 1.0)));
        let mut degree = vec![0.0; self.nodes];
        for &(u, _, w) in &edges {
            degree[u] += w;
        }
        for e in &mut edges {
            e.2 /= (degree[e.0] * degree[e.1]).sqrt();
        }
        EdgeIndex::new(self.nodes, &edges)
    }
}

/// Softmax of `values` within each receiving-node segment; empty segments
/// contribute nothing.
pub fn segment_softmax(values: &[f64], index: &EdgeIndex) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for u in 0..index.nodes() {
        let seg = index.segment(u);
        if seg.is_empty() {
            continue;
        }
        let max = values[seg.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for e in seg.clone() {
            out[e] = (values[e] - max).exp();
            total += out[e];
        }
        for e in seg {
            out[e] /= total;
        }
    }
    out
}

/// One sample: node features, its edges and the row of the acting node.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub features: Matrix,
    pub edges: Vec<(usize, usize, f64)>,
    pub ego: usize,
    pub state: Vec<f64>,
}

/// Samples packed block-diagonally into one disconnected graph.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub features: Matrix,
    pub edges: Rc<EdgeIndex>,
    pub gcn_edges: Rc<EdgeIndex>,
    /// Global row of each sample's acting node.
    pub ego: Vec<usize>,
    /// One state vector per sample.
    pub states: Matrix,
}

impl GraphBatch {
    pub fn pack(samples: &[&GraphSample]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| NnError::InvalidArgument("empty batch".into()))?;
        let cols = first.features.cols();
        let state_dim = first.state.len();
        let total: usize = samples.iter().map(|s| s.features.rows()).sum();
        let mut features = Vec::with_capacity(total * cols);
        let mut edges = Vec::new();
        let mut ego = Vec::with_capacity(samples.len());
        let mut states = Vec::with_capacity(samples.len() * state_dim);
        let mut base = 0;
        for s in samples {
            if s.features.cols() != cols || s.state.len() != state_dim {
                return Err(NnError::Shape("samples disagree on feature or state width".into()));
            }
            if s.ego >= s.features.rows() {
                return Err(NnError::Shape(format!("ego row {} of {}", s.ego, s.features.rows())));
            }
            features.extend_from_slice(s.features.data());
            edges.extend(s.edges.iter().map(|&(u, v, w)| (u + base, v + base, w)));
            ego.push(base + s.ego);
            states.extend_from_slice(&s.state);
            base += s.features.rows();
        }
        let edges = EdgeIndex::new(total, &edges)?;
        let gcn_edges = edges.gcn_normalized()?;
        Ok(Self {
            features: Matrix::new(total, cols, features)?,
            edges: Rc::new(edges),
            gcn_edges: Rc::new(gcn_edges),
            ego,
            states: Matrix::new(samples.len(), state_dim, states)?,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.ego.len()
    }
}
