//! Attributed graphs and datasets of them.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A directed edge `(center, source)`: the message travels from `source` to
/// `center`.
pub type Edge = (usize, usize);

/// Node features `X` (`|V|×d`), directed edges, edge features `E`
/// (`|E|×p`), and an optional class label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributedGraph {
    node_features: Matrix,
    edges: Vec<Edge>,
    edge_features: Matrix,
    label: Option<usize>,
}

impl AttributedGraph {
    pub fn new(
        node_features: Matrix,
        edges: Vec<Edge>,
        edge_features: Matrix,
        label: Option<usize>,
    ) -> Result<Self> {
        let n = node_features.rows();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if node_features.cols() == 0 {
            return Err(Error::InvalidGraph("node feature width d must be >= 1".into()));
        }
        if edge_features.rows() != edges.len() {
            return Err(Error::InvalidGraph(format!(
                "{} edge-feature rows for {} edges",
                edge_features.rows(),
                edges.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for (i, &(v, h)) in edges.iter().enumerate() {
            if v >= n || h >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} = ({v}, {h}) out of range for {n} nodes"
                )));
            }
            if !seen.insert((v, h)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({v}, {h})")));
            }
        }
        Ok(AttributedGraph {
            node_features,
            edges,
            edge_features,
            label,
        })
    }

    /// Graph without edge features (`p = 0`).
    pub fn without_edge_features(
        node_features: Matrix,
        edges: Vec<Edge>,
        label: Option<usize>,
    ) -> Result<Self> {
        let e = Matrix::zeros(edges.len(), 0);
        Self::new(node_features, edges, e, label)
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_dim(&self) -> usize {
        self.node_features.cols()
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_features.cols()
    }

    pub fn node_features(&self) -> &Matrix {
        &self.node_features
    }

    pub fn edge_features(&self) -> &Matrix {
        &self.edge_features
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub(crate) fn node_features_mut(&mut self) -> &mut Matrix {
        &mut self.node_features
    }

    pub(crate) fn edge_features_mut(&mut self) -> &mut Matrix {
        &mut self.edge_features
    }

    /// Keeps only the edges for which `keep` returns true, with their features.
    pub(crate) fn retain_edges(&mut self, mut keep: impl FnMut(usize, Edge) -> bool) {
        let kept: Vec<usize> = (0..self.edges.len())
            .filter(|&i| keep(i, self.edges[i]))
            .collect();
        self.edges = kept.iter().map(|&i| self.edges[i]).collect();
        self.edge_features = self.edge_features.select_rows(&kept);
    }

    /// In-degree (number of incoming messages, self excluded) per node.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = alloc::vec![0; self.num_nodes()];
        for &(v, _) in &self.edges {
            deg[v] += 1;
        }
        deg
    }

    /// Adds the reverse of every edge that lacks one, copying the edge-feature
    /// row. Reverse edges are appended after the original edges, in order.
    pub fn to_bidirected(&self) -> AttributedGraph {
        let present: BTreeSet<Edge> = self.edges.iter().copied().collect();
        let mut edges = self.edges.clone();
        let mut rows: Vec<usize> = (0..self.edges.len()).collect();
        let mut added = BTreeSet::new();
        for (i, &(v, h)) in self.edges.iter().enumerate() {
            if !present.contains(&(h, v)) && added.insert((h, v)) {
                edges.push((h, v));
                rows.push(i);
            }
        }
        AttributedGraph {
            node_features: self.node_features.clone(),
            edges,
            edge_features: self.edge_features.select_rows(&rows),
            label: self.label,
        }
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<AttributedGraph> {
        let n = self.num_nodes();
        if perm.len() != n || perm.iter().collect::<BTreeSet<_>>().len() != n || perm.iter().any(|&p| p >= n) {
            return Err(Error::arg("permutation does not match node count"));
        }
        let mut x = Matrix::zeros(n, self.node_dim());
        for (old, &new) in perm.iter().enumerate() {
            x.row_mut(new).copy_from_slice(self.node_features.row(old));
        }
        let edges = self.edges.iter().map(|&(v, h)| (perm[v], perm[h])).collect();
        AttributedGraph::new(x, edges, self.edge_features.clone(), self.label)
    }
}

/// A labelled collection of graphs sharing feature widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDataset {
    graphs: Vec<AttributedGraph>,
    num_classes: usize,
    node_dim: usize,
    edge_dim: usize,
}

impl GraphDataset {
    pub fn new(
        graphs: Vec<AttributedGraph>,
        num_classes: usize,
        node_dim: usize,
        edge_dim: usize,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidGraph("num_classes must be positive".into()));
        }
        for (i, g) in graphs.iter().enumerate() {
            if g.node_dim() != node_dim || g.edge_dim() != edge_dim {
                return Err(Error::InvalidGraph(format!(
                    "graph {i} has d={}, p={} but the dataset declares d={node_dim}, p={edge_dim}",
                    g.node_dim(),
                    g.edge_dim()
                )));
            }
            if let Some(y) = g.label() {
                if y >= num_classes {
                    return Err(Error::InvalidGraph(format!(
                        "graph {i} has label {y} >= num_classes {num_classes}"
                    )));
                }
            }
        }
        Ok(GraphDataset {
            graphs,
            num_classes,
            node_dim,
            edge_dim,
        })
    }

    pub fn graphs(&self) -> &[AttributedGraph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    /// Labels of all graphs; errors if any graph is unlabelled.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.graphs
            .iter()
            .enumerate()
            .map(|(i, g)| {
                g.label()
                    .ok_or_else(|| Error::arg(format!("graph {i} has no label")))
            })
            .collect()
    }

    pub fn mean_nodes(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.num_nodes() as f64).sum::<f64>() / self.graphs.len() as f64
    }

    pub fn max_nodes(&self) -> usize {
        self.graphs.iter().map(|g| g.num_nodes()).max().unwrap_or(0)
    }

    /// Fraction of graphs in the most frequent class.
    pub fn majority_rate(&self) -> Result<f64> {
        let labels = self.labels()?;
        if labels.is_empty() {
            return Err(Error::arg("empty dataset"));
        }
        let mut counts = alloc::vec![0usize; self.num_classes];
        for y in &labels {
            counts[*y] += 1;
        }
        Ok(*counts.iter().max().unwrap() as f64 / labels.len() as f64)
    }

    pub fn to_bidirected(&self) -> GraphDataset {
        GraphDataset {
            graphs: self.graphs.iter().map(|g| g.to_bidirected()).collect(),
            ..self.clone()
        }
    }

    pub fn subset(&self, idx: &[usize]) -> GraphDataset {
        GraphDataset {
            graphs: idx.iter().map(|&i| self.graphs[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// Replaces every graph's node features with a one-hot encoding of its
    /// in-degree, capped at `max_degree` (the last bucket collects the tail).
    pub fn with_degree_features(&self, max_degree: usize) -> Result<GraphDataset> {
        let width = max_degree + 1;
        let graphs = self
            .graphs
            .iter()
            .map(|g| {
                let deg = g.in_degrees();
                let x = Matrix::from_fn(g.num_nodes(), width, |i, j| {
                    if deg[i].min(max_degree) == j {
                        1.0
                    } else {
                        0.0
                    }
                });
                AttributedGraph::new(x, g.edges.clone(), g.edge_features.clone(), g.label)
            })
            .collect::<Result<Vec<_>>>()?;
        GraphDataset::new(graphs, self.num_classes, width, self.edge_dim)
    }
}
