//! The shared-weight two-branch model and augmented-message construction.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attgma::AttgmaParams;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::gnn::{self, EncoderParams, GraphBatch, Readout};
use crate::linalg::Matrix;
use crate::mixup;
use crate::params::{glorot, Bound, Linear, ParamId, ParamStore};

/// Which message augmentation the second branch applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    #[serde(rename = "d")]
    Drop,
    #[serde(rename = "p")]
    Perturb,
    #[serde(rename = "m")]
    Mixup,
}

impl Variant {
    pub fn short(self) -> &'static str {
        match self {
            Variant::Drop => "d",
            Variant::Perturb => "p",
            Variant::Mixup => "m",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" | "drop" => Ok(Variant::Drop),
            "p" | "perturb" => Ok(Variant::Perturb),
            "m" | "mixup" => Ok(Variant::Mixup),
            other => Err(Error::Config(format!("unknown variant '{other}' (expected d, p or m)"))),
        }
    }
}

/// Architecture of a [`Model`]; enough to rebuild it before loading weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub node_dim: usize,
    pub edge_dim: usize,
    pub num_classes: usize,
    pub hidden: usize,
    pub layers: usize,
    pub readout: Readout,
    /// Attention width of the mixup projections, when mixup is used.
    pub mixup_k: Option<usize>,
    /// Hidden width of the learnable augmentor, when enabled.
    pub attgma_hidden: Option<usize>,
    pub gumbel_temperature: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixupHandles {
    pub w_q: ParamId,
    pub w_k: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub encoder: EncoderParams,
    pub head: Linear,
    pub mixup: Option<MixupHandles>,
    pub augmentor: Option<AttgmaParams>,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        if spec.num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", spec.num_classes)));
        }
        let width = spec.node_dim + spec.edge_dim;
        let mut store = ParamStore::new();
        let encoder = EncoderParams::new(&mut store, "encoder", width, spec.hidden, spec.layers, rng)?;
        let head = Linear::new(&mut store, "classifier", spec.hidden, spec.num_classes, rng);
        let mixup = match spec.mixup_k {
            Some(0) => return Err(Error::Config("mixup.k must be positive".into())),
            Some(k) => Some(MixupHandles {
                w_q: store.add("mixup.w_q", glorot(width, k, rng)),
                w_k: store.add("mixup.w_k", glorot(width, k, rng)),
            }),
            None => None,
        };
        let augmentor = match spec.attgma_hidden {
            Some(h) => Some(AttgmaParams::new(
                &mut store,
                spec.node_dim,
                spec.edge_dim,
                h,
                spec.gumbel_temperature,
                rng,
            )?),
            None => None,
        };
        Ok(Model {
            spec,
            store,
            encoder,
            head,
            mixup,
            augmentor,
        })
    }

    pub fn width(&self) -> usize {
        self.spec.node_dim + self.spec.edge_dim
    }

    /// Graph embeddings of the original messages, evaluated without
    /// gradients. Row `i` belongs to `batch` graph `i`.
    pub fn embed(&self, batch: &GraphBatch) -> Result<Matrix> {
        let mut t = Tape::new();
        let b = self.store.bind_frozen(&mut t);
        let x = t.constant(batch.messages().clone());
        let out = forward_branch(&mut t, &b, self, batch, x)?;
        Ok(t.value(out.graph_embeddings).clone())
    }

    /// Class probabilities from the original-message branch.
    pub fn predict(&self, batch: &GraphBatch) -> Result<Matrix> {
        let mut t = Tape::new();
        let b = self.store.bind_frozen(&mut t);
        let x = t.constant(batch.messages().clone());
        let out = forward_branch(&mut t, &b, self, batch, x)?;
        let p = t.softmax_rows(out.logits)?;
        Ok(t.value(p).clone())
    }

    /// Tensor names in store order, for diagnostics.
    pub fn param_names(&self) -> Vec<String> {
        self.store.iter().map(|(n, _)| n.into()).collect()
    }
}

/// Outputs of one branch.
#[derive(Clone, Copy, Debug)]
pub struct BranchOutput {
    pub node_embeddings: Var,
    pub graph_embeddings: Var,
    pub logits: Var,
}

/// Encoder, readout and classifier applied to first-layer messages `x`.
pub fn forward_branch(t: &mut Tape, b: &Bound, model: &Model, batch: &GraphBatch, x: Var) -> Result<BranchOutput> {
    let h = gnn::encode_batch(t, b, &model.encoder, batch, x)?;
    let z = gnn::readout_batch(t, h, batch, model.spec.readout)?;
    let logits = model.head.forward(t, b, z)?;
    Ok(BranchOutput {
        node_embeddings: h,
        graph_embeddings: z,
        logits,
    })
}

/// Random quantities shared by every pass of one training step.
#[derive(Clone, Debug, Default)]
pub struct StepNoise {
    /// Perturbation noise aligned with the batch's message rows.
    pub perturb: Option<Matrix>,
    /// Mixup partner of each graph in the batch.
    pub partners: Option<Vec<usize>>,
}

impl StepNoise {
    pub fn draw<R: Rng + ?Sized>(variant: Variant, batch: &GraphBatch, noise_std: f64, rng: &mut R) -> Result<Self> {
        Ok(match variant {
            Variant::Drop => StepNoise::default(),
            Variant::Perturb => StepNoise {
                perturb: Some(crate::augment::gaussian(batch.num_rows(), batch.width(), noise_std, rng)),
                partners: None,
            },
            Variant::Mixup => StepNoise {
                perturb: None,
                partners: Some(mixup_partners(batch.num_graphs(), rng)?),
            },
        })
    }
}

/// For each graph a uniformly chosen different graph of the batch.
pub fn mixup_partners<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::arg("mixup needs at least two graphs per batch"));
    }
    Ok((0..n)
        .map(|i| {
            let j = rng.random_range(0..n - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        })
        .collect())
}

/// Second-branch messages from the original messages `x` and the indicator
/// `theta` (constant or straight-through).
pub fn augment_messages(
    t: &mut Tape,
    b: &Bound,
    model: &Model,
    batch: &GraphBatch,
    variant: Variant,
    x: Var,
    theta: Var,
    noise: &StepNoise,
) -> Result<Var> {
    match variant {
        Variant::Drop => {
            let (r, c) = t.value(theta).shape();
            let ones = t.constant(Matrix::filled(r, c, 1.0));
            let keep = t.sub(ones, theta)?;
            t.mul(keep, x)
        }
        Variant::Perturb => {
            let n = noise
                .perturb
                .as_ref()
                .ok_or_else(|| Error::arg("perturbation needs a noise matrix"))?;
            let n = t.constant(n.clone());
            let added = t.mul(theta, n)?;
            t.add(x, added)
        }
        Variant::Mixup => {
            let handles = model
                .mixup
                .ok_or_else(|| Error::Config("mixup variant needs mixup parameters".into()))?;
            let partners = noise
                .partners
                .as_ref()
                .ok_or_else(|| Error::arg("mixup needs partner assignments"))?;
            if partners.len() != batch.num_graphs() {
                return Err(Error::shape(
                    "augment_messages",
                    format!("{} partners for {} graphs", partners.len(), batch.num_graphs()),
                ));
            }
            let blocks: Vec<Var> = (0..batch.num_graphs())
                .map(|i| t.row_gather(x, batch.row_range(i).collect::<Arc<[usize]>>()))
                .collect::<Result<_>>()?;
            let mixed = partners
                .iter()
                .enumerate()
                .map(|(i, &j)| mixup::cross_mix_tape(t, blocks[i], blocks[j], b[handles.w_q], b[handles.w_k]))
                .collect::<Result<Vec<_>>>()?;
            let m_hat = t.concat_rows(&mixed)?;
            mixup::message_mixup_tape(t, x, m_hat, theta)
        }
    }
}
