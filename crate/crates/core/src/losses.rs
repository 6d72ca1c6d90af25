//! Contrastive, classification, attribution and total losses.
//!
//! The contrastive loss defaults to the aggregate form
//! `−(1/n)·log[Σᵢ exp(sᵢᵢ/τ) / Σ_{i≠j} exp(sᵢⱼ/τ)]` over cosine similarities
//! `sᵢⱼ = sim(zᵢ, z′ⱼ)`. Setting `per_sample_ntxent` switches to the usual
//! per-anchor average `−(1/n)·Σᵢ log[exp(sᵢᵢ/τ) / Σ_{j≠i} exp(sᵢⱼ/τ)]`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub tau: f64,
    pub alpha: f64,
    pub per_sample_ntxent: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            tau: 0.5,
            alpha: 1.0,
            per_sample_ntxent: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("loss.tau must be positive, got {}", self.tau)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("loss.alpha must be non-negative, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Contrastive loss between two `n×H` embedding matrices.
pub fn nt_xent(t: &mut Tape, z: Var, z_prime: Var, cfg: &LossConfig) -> Result<Var> {
    cfg.validate()?;
    let (n, m) = (t.value(z).rows(), t.value(z_prime).rows());
    if n != m {
        return Err(Error::shape("nt_xent", format!("{n} vs {m} embeddings")));
    }
    if n < 2 {
        return Err(Error::arg("nt_xent needs at least two pairs"));
    }
    let sim = t.cosine_similarity(z, z_prime)?;
    let logits = t.scale(sim, 1.0 / cfg.tau)?;
    let e = t.exp(logits)?;
    let off_mask = t.constant(Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }));
    let off = t.mul(e, off_mask)?;
    if cfg.per_sample_ntxent {
        let diag_mask = t.constant(Matrix::identity(n));
        let pos = t.mul(logits, diag_mask)?;
        let pos = t.sum_rows(pos)?;
        let den = t.sum_rows(off)?;
        let log_den = t.log(den)?;
        let ratio = t.sub(pos, log_den)?;
        let mean = t.mean(ratio)?;
        t.scale(mean, -1.0)
    } else {
        let diag_mask = t.constant(Matrix::identity(n));
        let pos = t.mul(e, diag_mask)?;
        let num = t.sum(pos)?;
        let den = t.sum(off)?;
        let (log_num, log_den) = (t.log(num)?, t.log(den)?);
        let ratio = t.sub(log_num, log_den)?;
        t.scale(ratio, -1.0 / n as f64)
    }
}

/// Mean negative log-likelihood of the true classes for a `B×C` probability
/// matrix and a one-hot target. Probabilities below [`PROB_FLOOR`] are clamped;
/// the tape's clamp counter records how often.
pub fn cross_entropy(t: &mut Tape, u: Var, y: &Matrix) -> Result<Var> {
    t.value(u).expect_same_shape(y, "cross_entropy")?;
    if y.rows() == 0 {
        return Err(Error::arg("cross_entropy of an empty batch"));
    }
    // Only true-class entries matter; floor the rest at 1 so they never count
    // as clamp events.
    let gated = Matrix::from_fn(y.rows(), y.cols(), |i, j| if y[(i, j)] > 0.0 { 0.0 } else { 1.0 });
    let gate = t.constant(gated);
    let target = t.constant(y.clone());
    let picked = t.mul(u, target)?;
    let picked = t.add(picked, gate)?;
    let safe = t.clamp_min(picked, PROB_FLOOR)?;
    let logs = t.log(safe)?;
    let total = t.sum(logs)?;
    t.scale(total, -1.0 / y.rows() as f64)
}

/// Classification loss from logits; equal to [`cross_entropy`] on their
/// softmax, computed without forming probabilities.
pub fn classification_loss(t: &mut Tape, logits: Var, labels: Arc<[usize]>) -> Result<Var> {
    t.cross_entropy_with_logits(logits, labels)
}

/// Classifier outputs for the labeled graphs of both branches.
#[derive(Clone, Debug)]
pub struct ClassTerms {
    pub logits: Var,
    pub logits_prime: Var,
    pub labels: Arc<[usize]>,
}

/// Individual terms and their weighted sum.
#[derive(Clone, Copy, Debug)]
pub struct LossParts {
    pub total: Var,
    pub contrastive: Var,
    pub cls: Option<Var>,
    pub cls_prime: Option<Var>,
}

/// `L_cls(U, Y) + L_cls(U′, Y) + α·L_cl`, or the contrastive loss alone when
/// `class_terms` is `None`.
pub fn total_loss(
    t: &mut Tape,
    class_terms: Option<&ClassTerms>,
    z: Var,
    z_prime: Var,
    cfg: &LossConfig,
) -> Result<LossParts> {
    let contrastive = nt_xent(t, z, z_prime, cfg)?;
    let Some(ct) = class_terms else {
        return Ok(LossParts {
            total: contrastive,
            contrastive,
            cls: None,
            cls_prime: None,
        });
    };
    let cls = classification_loss(t, ct.logits, ct.labels.clone())?;
    let cls_prime = classification_loss(t, ct.logits_prime, ct.labels.clone())?;
    let both = t.add(cls, cls_prime)?;
    let weighted = t.scale(contrastive, cfg.alpha)?;
    Ok(LossParts {
        total: t.add(both, weighted)?,
        contrastive,
        cls: Some(cls),
        cls_prime: Some(cls_prime),
    })
}

/// `L_cls(U′, Ŷ) + α·L_cl` with `Ŷ` the argmax of the augmented branch's own
/// predictions, treated as constants.
pub fn attribution_loss(t: &mut Tape, logits_prime: Var, z: Var, z_prime: Var, cfg: &LossConfig) -> Result<Var> {
    let labels: Arc<[usize]> = pseudo_labels(t.value(logits_prime)).into();
    let cls = classification_loss(t, logits_prime, labels)?;
    let contrastive = nt_xent(t, z, z_prime, cfg)?;
    let weighted = t.scale(contrastive, cfg.alpha)?;
    t.add(cls, weighted)
}

/// Per-row argmax, ties toward the lowest index. Works on probabilities or
/// logits alike since softmax preserves order.
pub fn pseudo_labels(u: &Matrix) -> Vec<usize> {
    u.row_iter()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Matrix> {
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::arg(format!("label {bad} >= {num_classes} classes")));
    }
    Ok(Matrix::from_fn(labels.len(), num_classes, |i, j| if labels[i] == j { 1.0 } else { 0.0 }))
}

fn eval(f: impl FnOnce(&mut Tape) -> Result<Var>) -> Result<f64> {
    let mut t = Tape::new();
    let v = f(&mut t)?;
    if t.clamp_events() > 0 {
        log::warn!("cross_entropy clamped {} probabilities at {PROB_FLOOR}", t.clamp_events());
    }
    t.scalar(v)
}

/// Value of [`nt_xent`] on plain matrices.
pub fn nt_xent_value(z: &Matrix, z_prime: &Matrix, cfg: &LossConfig) -> Result<f64> {
    eval(|t| {
        let (a, b) = (t.constant(z.clone()), t.constant(z_prime.clone()));
        nt_xent(t, a, b, cfg)
    })
}

/// Value of [`cross_entropy`] on plain matrices.
pub fn cross_entropy_value(u: &Matrix, y: &Matrix) -> Result<f64> {
    eval(|t| {
        let a = t.constant(u.clone());
        cross_entropy(t, a, y)
    })
}

/// `L_cls(U, Y) + L_cls(U′, Y) + α·L_cl` on probability matrices.
pub fn total_loss_value(
    u: &Matrix,
    u_prime: &Matrix,
    y: &Matrix,
    z: &Matrix,
    z_prime: &Matrix,
    cfg: &LossConfig,
) -> Result<f64> {
    let cls = cross_entropy_value(u, y)? + cross_entropy_value(u_prime, y)?;
    Ok(cls + cfg.alpha * nt_xent_value(z, z_prime, cfg)?)
}

/// `L_cls(U′, Ŷ) + α·L_cl` on probability matrices.
pub fn attribution_loss_value(u_prime: &Matrix, z: &Matrix, z_prime: &Matrix, cfg: &LossConfig) -> Result<f64> {
    let y_hat = one_hot(&pseudo_labels(u_prime), u_prime.cols())?;
    Ok(cross_entropy_value(u_prime, &y_hat)? + cfg.alpha * nt_xent_value(z, z_prime, cfg)?)
}
