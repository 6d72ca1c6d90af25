//! Attribution-guided learnable augmentor.
//!
//! A small GIN encodes the original messages; message rows are rebuilt from
//! the embeddings (`[E_h ‖ e_vh]`) and a two-layer MLP with a sigmoid maps
//! each row to selection probabilities `P`. The attribution `A` is the
//! gradient magnitude of the attribution loss with respect to `P`, min-max
//! normalized per graph, and the indicator is a hard Gumbel-Softmax sample of
//! `P ⊙ A`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::IndicatorMatrix;
use crate::autodiff::{gumbel_softmax, Tape, Var};
use crate::error::{Error, Result};
use crate::gnn::{self, EncoderParams, GraphBatch};
use crate::graph::AttributedGraph;
use crate::linalg::Matrix;
use crate::losses::{attribution_loss, LossConfig};
use crate::model::{augment_messages, forward_branch, Model, StepNoise, Variant};
use crate::params::{Bound, Linear, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttgmaConfig {
    pub enabled: bool,
    pub gumbel_temperature: f64,
    pub hidden: usize,
    /// Compute `A` once per batch at the start of each epoch instead of at
    /// every step.
    pub epoch_cache: bool,
}

impl Default for AttgmaConfig {
    fn default() -> Self {
        AttgmaConfig {
            enabled: false,
            gumbel_temperature: 1.0,
            hidden: 32,
            epoch_cache: false,
        }
    }
}

/// Handles of the augmentor's parameters inside the model's store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttgmaParams {
    pub encoder: EncoderParams,
    pub mlp: [Linear; 2],
    pub gumbel_temperature: f64,
}

impl AttgmaParams {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        node_dim: usize,
        edge_dim: usize,
        hidden: usize,
        gumbel_temperature: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(gumbel_temperature > 0.0 && gumbel_temperature.is_finite()) {
            return Err(Error::Config(format!(
                "attgma.gumbel_temperature must be positive, got {gumbel_temperature}"
            )));
        }
        let width = node_dim + edge_dim;
        let encoder = EncoderParams::new(store, "attgma.encoder", width, hidden, 2, rng)?;
        let mlp = [
            Linear::new(store, "attgma.mlp.0", hidden + edge_dim, hidden, rng),
            Linear::new(store, "attgma.mlp.1", hidden, width, rng),
        ];
        Ok(AttgmaParams {
            encoder,
            mlp,
            gumbel_temperature,
        })
    }
}

/// `P` for every message row of the batch, entries in `(0, 1)`.
pub fn probability_tape(t: &mut Tape, b: &Bound, params: &AttgmaParams, batch: &GraphBatch) -> Result<Var> {
    let x = t.constant(batch.messages().clone());
    let h = gnn::encode_batch(t, b, &params.encoder, batch, x)?;
    let src = t.row_gather(h, batch.sources().clone())?;
    let rows = if batch.edge_dim() > 0 {
        let e = t.constant(batch.edge_parts());
        t.concat_cols(&[src, e])?
    } else {
        src
    };
    let a = params.mlp[0].forward(t, b, rows)?;
    let a = t.relu(a)?;
    let o = params.mlp[1].forward(t, b, a)?;
    t.sigmoid(o)
}

/// `P` for a single graph, without gradients.
pub fn probability_matrix(g: &AttributedGraph, store: &ParamStore, params: &AttgmaParams) -> Result<Matrix> {
    let batch = GraphBatch::from_graphs(&[g])?;
    let mut t = Tape::new();
    let b = store.bind_frozen(&mut t);
    let p = probability_tape(&mut t, &b, params, &batch)?;
    Ok(t.value(p).clone())
}

/// Normalized attribution for the message rows of one graph, entries in
/// `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionMatrix {
    values: Matrix,
}

impl AttributionMatrix {
    /// Min-max normalization of `|G|`; a constant `|G|` maps to 0.5.
    pub fn from_gradient(g: &Matrix) -> Result<Self> {
        if !g.is_finite() {
            return Err(Error::Numeric { op: "attribution gradient" });
        }
        let abs = g.map(f64::abs);
        let lo = abs.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = abs.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let values = if abs.is_empty() || hi == lo {
            Matrix::filled(abs.rows(), abs.cols(), 0.5)
        } else {
            abs.map(|v| (v - lo) / (hi - lo))
        };
        Ok(AttributionMatrix { values })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }
}

/// How the first (attribution) pass draws its indicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirstPass {
    /// Hard Gumbel-Softmax sample of `P`, as during training.
    Sampled,
    /// Deterministic relaxation `sigmoid(P/τ)`; removes sampling noise so
    /// symmetric elements get identical attributions.
    Relaxed,
}

/// First pass: attribution matrices for every graph of the batch, stacked in
/// batch row order. Parameter gradients of this pass are not kept.
pub fn attribution_batch<R: Rng + ?Sized>(
    model: &Model,
    batch: &GraphBatch,
    variant: Variant,
    noise: &StepNoise,
    loss: &LossConfig,
    first_pass: FirstPass,
    rng: &mut R,
) -> Result<Vec<AttributionMatrix>> {
    let params = model
        .augmentor
        .as_ref()
        .ok_or_else(|| Error::Config("attribution needs augmentor parameters".into()))?;
    let mut t = Tape::new();
    let b = model.store.bind_frozen(&mut t);
    let p_frozen = probability_tape(&mut t, &b, params, batch)?;
    let p = t.param(t.value(p_frozen).clone());
    let theta = match first_pass {
        FirstPass::Sampled => gumbel_softmax(&mut t, p, params.gumbel_temperature, rng, true)?,
        FirstPass::Relaxed => {
            let s = t.scale(p, 1.0 / params.gumbel_temperature)?;
            t.sigmoid(s)?
        }
    };
    let x = t.constant(batch.messages().clone());
    let x_aug = augment_messages(&mut t, &b, model, batch, variant, x, theta, noise)?;
    let orig = forward_branch(&mut t, &b, model, batch, x)?;
    let aug = forward_branch(&mut t, &b, model, batch, x_aug)?;
    let la = attribution_loss(&mut t, aug.logits, orig.graph_embeddings, aug.graph_embeddings, loss)?;
    t.backward(la)?;
    let grad = t
        .grad(p)
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(batch.num_rows(), batch.width()));
    (0..batch.num_graphs())
        .map(|gi| {
            let rows: Vec<usize> = batch.row_range(gi).collect();
            AttributionMatrix::from_gradient(&grad.select_rows(&rows))
        })
        .collect()
}

/// Stacks per-graph attributions into one batch-aligned matrix.
pub fn stack_attributions(parts: &[AttributionMatrix]) -> Result<Matrix> {
    let refs: Vec<&Matrix> = parts.iter().map(|a| &a.values).collect();
    Matrix::vstack(&refs)
}

/// Hard indicator from scores `P ⊙ A`; the forward value is binary and the
/// gradient reaches `P` through the relaxed sample.
pub fn sample_indicator_tape<R: Rng + ?Sized>(
    t: &mut Tape,
    p: Var,
    a: &Matrix,
    temperature: f64,
    rng: &mut R,
) -> Result<Var> {
    if t.value(p).shape() != a.shape() {
        return Err(Error::arg(format!(
            "probability {:?} and attribution {:?} shapes differ",
            t.value(p).shape(),
            a.shape()
        )));
    }
    let a = t.constant(a.clone());
    let scores = t.mul(p, a)?;
    gumbel_softmax(t, scores, temperature, rng, true)
}

/// [`sample_indicator_tape`] on plain matrices.
pub fn sample_indicator<R: Rng + ?Sized>(
    p: &Matrix,
    a: &AttributionMatrix,
    temperature: f64,
    rng: &mut R,
) -> Result<IndicatorMatrix> {
    let mut t = Tape::new();
    let pv = t.constant(p.clone());
    let theta = sample_indicator_tape(&mut t, pv, a.values(), temperature, rng)?;
    IndicatorMatrix::from_matrix(t.value(theta))
}
