//! GIN-style encoder over message matrices, readout, and classifier head.
//!
//! Layer 1 sums the (possibly augmented) message rows per center node and
//! applies a two-layer MLP followed by ReLU (omitted after the last layer). Later layers use the current
//! embeddings of source nodes as messages, so edge features are consumed at
//! layer 1 only. The self row in every neighborhood plays the role of GIN's
//! `(1 + ε)·x_v` term with `ε = 0`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::{self, Matrix};
use crate::message::{build_messages, MessageFn, MessageMatrix};
use crate::params::{Bound, Linear, ParamStore};

/// Several graphs laid out as one block-diagonal graph.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    messages: Matrix,
    centers: Arc<[usize]>,
    sources: Arc<[usize]>,
    node_graph: Arc<[usize]>,
    inv_sizes: Arc<[f64]>,
    row_ranges: Vec<Range<usize>>,
    node_ranges: Vec<Range<usize>>,
    node_dim: usize,
    edge_dim: usize,
}

impl GraphBatch {
    pub fn from_graphs(graphs: &[&AttributedGraph]) -> Result<Self> {
        let msgs = graphs
            .iter()
            .map(|g| build_messages(g, MessageFn::Concat))
            .collect::<Result<Vec<_>>>()?;
        Self::from_messages(&msgs.iter().collect::<Vec<_>>())
    }

    pub fn from_messages(msgs: &[&MessageMatrix]) -> Result<Self> {
        let first = msgs.first().ok_or_else(|| Error::arg("empty batch"))?;
        let (node_dim, edge_dim) = (first.node_dim(), first.edge_dim());
        let mut centers = Vec::new();
        let mut sources = Vec::new();
        let mut node_graph = Vec::new();
        let mut inv_sizes = Vec::with_capacity(msgs.len());
        let mut row_ranges = Vec::with_capacity(msgs.len());
        let mut node_ranges = Vec::with_capacity(msgs.len());
        let mut offset = 0;
        for (gi, m) in msgs.iter().enumerate() {
            if m.node_dim() != node_dim || m.edge_dim() != edge_dim {
                return Err(Error::shape(
                    "GraphBatch",
                    format!("graph {gi} has message split ({}, {})", m.node_dim(), m.edge_dim()),
                ));
            }
            if m.num_nodes() == 0 {
                return Err(Error::arg(format!("graph {gi} has no nodes")));
            }
            row_ranges.push(centers.len()..centers.len() + m.num_rows());
            node_ranges.push(offset..offset + m.num_nodes());
            centers.extend(m.index().iter().map(|&(v, _)| v + offset));
            sources.extend(m.index().iter().map(|&(_, h)| h + offset));
            node_graph.extend(core::iter::repeat_n(gi, m.num_nodes()));
            inv_sizes.push(1.0 / m.num_nodes() as f64);
            offset += m.num_nodes();
        }
        let rows: Vec<&Matrix> = msgs.iter().map(|m| m.rows()).collect();
        Ok(GraphBatch {
            messages: Matrix::vstack(&rows)?,
            centers: centers.into(),
            sources: sources.into(),
            node_graph: node_graph.into(),
            inv_sizes: inv_sizes.into(),
            row_ranges,
            node_ranges,
            node_dim,
            edge_dim,
        })
    }

    pub fn messages(&self) -> &Matrix {
        &self.messages
    }

    pub fn num_graphs(&self) -> usize {
        self.row_ranges.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_graph.len()
    }

    pub fn num_rows(&self) -> usize {
        self.centers.len()
    }

    pub fn width(&self) -> usize {
        self.node_dim + self.edge_dim
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn centers(&self) -> &Arc<[usize]> {
        &self.centers
    }

    pub fn sources(&self) -> &Arc<[usize]> {
        &self.sources
    }

    pub fn row_range(&self, graph: usize) -> Range<usize> {
        self.row_ranges[graph].clone()
    }

    pub fn node_range(&self, graph: usize) -> Range<usize> {
        self.node_ranges[graph].clone()
    }

    /// Message rows of one graph in the batch.
    pub fn graph_messages(&self, graph: usize) -> Matrix {
        let r = self.row_range(graph);
        self.messages.select_rows(&r.collect::<Vec<_>>())
    }

    /// Edge-feature part `[d, d+p)` of every message row (zero for self rows).
    pub fn edge_parts(&self) -> Matrix {
        self.messages.column_block(self.node_dim, self.node_dim + self.edge_dim)
    }
}

/// One GIN layer: `relu(lin2(relu(lin1(z))))`, without the outer ReLU on the
/// last layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GinLayer {
    pub lin1: Linear,
    pub lin2: Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub layers: Vec<GinLayer>,
}

impl EncoderParams {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        in_width: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if num_layers == 0 || hidden == 0 || in_width == 0 {
            return Err(Error::Config(format!(
                "encoder needs positive sizes, got in={in_width}, hidden={hidden}, layers={num_layers}"
            )));
        }
        let layers = (0..num_layers)
            .map(|l| {
                let fan_in = if l == 0 { in_width } else { hidden };
                GinLayer {
                    lin1: Linear::new(store, &format!("{prefix}.{l}.lin1"), fan_in, hidden, rng),
                    lin2: Linear::new(store, &format!("{prefix}.{l}.lin2"), hidden, hidden, rng),
                }
            })
            .collect();
        Ok(EncoderParams { layers })
    }

    pub fn in_width(&self, store: &ParamStore) -> usize {
        self.layers[0].lin1.fan_in(store)
    }

    pub fn hidden(&self, store: &ParamStore) -> usize {
        self.layers.last().map_or(0, |l| l.lin2.fan_out(store))
    }
}

/// Intermediate values of an encoder pass.
#[derive(Clone, Copy, Debug)]
pub struct EncoderTrace {
    pub node_embeddings: Var,
    /// `lin1` output of layer 1, before any activation.
    pub first_preactivation: Var,
}

/// Node embeddings for a batch, with `layer1` (the possibly augmented message
/// rows aligned with `batch`) feeding the first layer.
pub fn encode_batch(t: &mut Tape, b: &Bound, enc: &EncoderParams, batch: &GraphBatch, layer1: Var) -> Result<Var> {
    Ok(encode_traced(t, b, enc, batch, layer1)?.node_embeddings)
}

pub fn encode_traced(
    t: &mut Tape,
    b: &Bound,
    enc: &EncoderParams,
    batch: &GraphBatch,
    layer1: Var,
) -> Result<EncoderTrace> {
    let (rows, width) = t.value(layer1).shape();
    let expected = t.value(b[enc.layers[0].lin1.weight]).rows();
    if width != expected {
        return Err(Error::Config(format!(
            "message width {width} does not match encoder input width {expected}"
        )));
    }
    if rows != batch.num_rows() {
        return Err(Error::shape(
            "encode",
            format!("{rows} message rows for a batch with {}", batch.num_rows()),
        ));
    }
    let n = batch.num_nodes();
    let mut h = layer1;
    let mut first = None;
    for (l, layer) in enc.layers.iter().enumerate() {
        let msgs = if l == 0 {
            h
        } else {
            t.row_gather(h, batch.sources.clone())?
        };
        let z = t.segment_sum(msgs, batch.centers.clone(), n)?;
        let pre = layer.lin1.forward(t, b, z)?;
        first.get_or_insert(pre);
        let a = t.relu(pre)?;
        let o = layer.lin2.forward(t, b, a)?;
        // The last layer stays linear: with non-negative outputs the
        // contrastive loss drives embeddings toward disjoint supports and
        // whole graphs can collapse to the zero vector.
        h = if l + 1 < enc.layers.len() { t.relu(o)? } else { o };
    }
    Ok(EncoderTrace {
        node_embeddings: h,
        first_preactivation: first.expect("at least one layer"),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    #[default]
    Sum,
    Mean,
}

/// Graph embeddings (`B×H`) from node embeddings.
pub fn readout_batch(t: &mut Tape, node_emb: Var, batch: &GraphBatch, method: Readout) -> Result<Var> {
    let s = t.segment_sum(node_emb, batch.node_graph.clone(), batch.num_graphs())?;
    match method {
        Readout::Sum => Ok(s),
        Readout::Mean => t.row_scale(s, batch.inv_sizes.clone()),
    }
}

/// Column-wise sum or mean over the rows of `node_emb`.
pub fn readout(node_emb: &Matrix, method: Readout) -> Result<Vec<f64>> {
    if node_emb.rows() == 0 {
        return Err(Error::arg("readout of a graph with no nodes"));
    }
    let mut out = alloc::vec![0.0; node_emb.cols()];
    for r in node_emb.row_iter() {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    if method == Readout::Mean {
        let n = node_emb.rows() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }
    Ok(out)
}

/// Class logits and probabilities for graph embeddings.
#[derive(Clone, Copy, Debug)]
pub struct ClassOutput {
    pub logits: Var,
    pub probs: Var,
}

pub fn classify_batch(t: &mut Tape, b: &Bound, head: &Linear, graph_emb: Var) -> Result<ClassOutput> {
    let logits = head.forward(t, b, graph_emb)?;
    let probs = t.softmax_rows(logits)?;
    Ok(ClassOutput { logits, probs })
}

/// Probability vector over classes for one graph embedding.
pub fn classify(graph_emb: &[f64], store: &ParamStore, head: &Linear) -> Result<Vec<f64>> {
    let x = Matrix::from_vec(1, graph_emb.len(), graph_emb.to_vec())?;
    let logits = x.matmul(store.get(head.weight))?.add(store.get(head.bias))?;
    Ok(linalg::softmax_rows(&logits).into_vec())
}

/// Node embeddings of a single graph, evaluated without gradients.
pub fn encode(
    g: &AttributedGraph,
    m_override: Option<&MessageMatrix>,
    store: &ParamStore,
    enc: &EncoderParams,
) -> Result<Matrix> {
    let own;
    let m = match m_override {
        Some(m) => m,
        None => {
            own = build_messages(g, MessageFn::Concat)?;
            &own
        }
    };
    if m.num_nodes() != g.num_nodes() {
        return Err(Error::arg("message override belongs to a different graph"));
    }
    let batch = GraphBatch::from_messages(&[m])?;
    let mut t = Tape::new();
    let b = store.bind_frozen(&mut t);
    let x = t.constant(batch.messages.clone());
    let h = encode_batch(&mut t, &b, enc, &batch, x)?;
    Ok(t.value(h).clone())
}
