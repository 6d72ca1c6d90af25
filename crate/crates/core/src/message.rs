//! The per-edge message matrix of a graph and sum aggregation back to nodes.
//!
//! Row layout: one row per directed edge in the graph's edge order, followed
//! by one self row `(v, v)` per node in node order. Under [`MessageFn::Concat`]
//! an edge row is `[x_h ‖ e_vh]` and a self row is `[x_v ‖ 0]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Edge};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MessageFn {
    /// `[x_h ‖ e_vh]`.
    #[default]
    Concat,
    /// Symmetric-normalized GCN coefficient times `x_h`; ignores edge features.
    GcnWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageMatrix {
    rows: Matrix,
    index: Vec<Edge>,
    node_dim: usize,
    edge_dim: usize,
    num_nodes: usize,
}

impl MessageMatrix {
    pub fn new(rows: Matrix, index: Vec<Edge>, node_dim: usize, edge_dim: usize, num_nodes: usize) -> Result<Self> {
        if rows.rows() != index.len() {
            return Err(Error::shape(
                "MessageMatrix::new",
                format!("{} rows but {} index entries", rows.rows(), index.len()),
            ));
        }
        if rows.cols() != node_dim + edge_dim {
            return Err(Error::shape(
                "MessageMatrix::new",
                format!("width {} != d + p = {}", rows.cols(), node_dim + edge_dim),
            ));
        }
        if let Some(&(v, h)) = index.iter().find(|&&(v, h)| v >= num_nodes || h >= num_nodes) {
            return Err(Error::arg(format!("index entry ({v}, {h}) out of range")));
        }
        Ok(MessageMatrix {
            rows,
            index,
            node_dim,
            edge_dim,
            num_nodes,
        })
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn into_rows(self) -> Matrix {
        self.rows
    }

    pub fn index(&self) -> &[Edge] {
        &self.index
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn width(&self) -> usize {
        self.node_dim + self.edge_dim
    }

    pub fn num_rows(&self) -> usize {
        self.index.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Same index map, new values.
    pub fn with_rows(&self, rows: Matrix) -> Result<MessageMatrix> {
        self.rows.expect_same_shape(&rows, "MessageMatrix::with_rows")?;
        Ok(MessageMatrix {
            rows,
            ..self.clone()
        })
    }

    /// Center node of every row.
    pub fn centers(&self) -> Vec<usize> {
        self.index.iter().map(|&(v, _)| v).collect()
    }

    /// Source node of every row.
    pub fn sources(&self) -> Vec<usize> {
        self.index.iter().map(|&(_, h)| h).collect()
    }

    /// Row index of a given `(center, source)` pair; self rows are `(v, v)`.
    pub fn row_of(&self, edge: Edge) -> Option<usize> {
        self.index.iter().position(|&e| e == edge)
    }
}

/// Row index map in the canonical order: graph edges, then self rows.
pub fn message_index(g: &AttributedGraph) -> Vec<Edge> {
    let mut index = Vec::with_capacity(g.num_edges() + g.num_nodes());
    index.extend_from_slice(g.edges());
    index.extend((0..g.num_nodes()).map(|v| (v, v)));
    index
}

pub fn build_messages(g: &AttributedGraph, f: MessageFn) -> Result<MessageMatrix> {
    let d = g.node_dim();
    let index = message_index(g);
    let x = g.node_features();
    match f {
        MessageFn::Concat => {
            let p = g.edge_dim();
            let e = g.edge_features();
            let mut rows = Matrix::zeros(index.len(), d + p);
            for (r, &(_, h)) in index.iter().enumerate() {
                let row = rows.row_mut(r);
                row[..d].copy_from_slice(x.row(h));
                if r < g.num_edges() {
                    row[d..].copy_from_slice(e.row(r));
                }
            }
            MessageMatrix::new(rows, index, d, p, g.num_nodes())
        }
        MessageFn::GcnWeighted => {
            if g.edge_dim() > 1 {
                return Err(Error::Unsupported(format!(
                    "GCN-weighted messages need scalar edge weights, got p = {}",
                    g.edge_dim()
                )));
            }
            let coeffs = gcn_message_coeffs(g);
            let mut rows = Matrix::zeros(index.len(), d);
            for (r, &(_, h)) in index.iter().enumerate() {
                for (o, &xv) in rows.row_mut(r).iter_mut().zip(x.row(h)) {
                    *o = coeffs[r] * xv;
                }
            }
            MessageMatrix::new(rows, index, d, 0, g.num_nodes())
        }
    }
}

/// Entries of `D^{-1/2}(I + A)D^{-1/2}` for every message row, where `A` is
/// the 0/1 adjacency (`A[v][h] = 1` for edge `v ← h`) and `D` the row-degree
/// matrix of `I + A`.
pub fn gcn_message_coeffs(g: &AttributedGraph) -> Vec<f64> {
    let deg: Vec<f64> = g.in_degrees().iter().map(|&k| (k + 1) as f64).collect();
    message_index(g)
        .iter()
        .map(|&(v, h)| 1.0 / libm::sqrt(deg[v] * deg[h]))
        .collect()
}

/// Sum of message rows per center node, `|V|×(d+p)`.
pub fn aggregate(m: &MessageMatrix) -> Matrix {
    let mut out = Matrix::zeros(m.num_nodes, m.width());
    for (r, &(v, _)) in m.index.iter().enumerate() {
        for (o, &x) in out.row_mut(v).iter_mut().zip(m.rows.row(r)) {
            *o += x;
        }
    }
    out
}

/// Sum aggregation restricted to rows where `keep` holds.
pub fn aggregate_masked(m: &MessageMatrix, keep: impl Fn(usize) -> bool) -> Matrix {
    let mut out = Matrix::zeros(m.num_nodes, m.width());
    for (r, &(v, _)) in m.index.iter().enumerate() {
        if !keep(r) {
            continue;
        }
        for (o, &x) in out.row_mut(v).iter_mut().zip(m.rows.row(r)) {
            *o += x;
        }
    }
    out
}

/// Number of message rows per center (self row included).
pub fn fan_in(m: &MessageMatrix) -> Vec<usize> {
    let mut c = vec![0; m.num_nodes];
    for &(v, _) in &m.index {
        c[v] += 1;
    }
    c
}
