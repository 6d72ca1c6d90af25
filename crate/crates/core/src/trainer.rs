//! Two-branch contrastive training, the unsupervised and semi-supervised
//! protocols, stratified k-fold splits and run reports.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attgma::{self, AttgmaConfig, FirstPass};
use crate::augment::random_indicator;
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::gnn::{GraphBatch, Readout};
use crate::graph::GraphDataset;
use crate::linalg::Matrix;
use crate::losses::{total_loss, ClassTerms, LossConfig};
use crate::message::{build_messages, MessageFn, MessageMatrix};
use crate::model::{augment_messages, forward_branch, Model, ModelSpec, StepNoise, Variant};
use crate::params::Adam;
use crate::probe::{self, LogisticProbe, ProbeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    #[serde(rename = "unsupervised")]
    Unsupervised,
    #[serde(rename = "semi")]
    SemiSupervised,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Unsupervised => "unsupervised",
            Mode::SemiSupervised => "semi",
        }
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsupervised" => Ok(Mode::Unsupervised),
            "semi" | "semisupervised" | "semi-supervised" => Ok(Mode::SemiSupervised),
            other => Err(Error::Config(format!("unknown task '{other}' (expected unsupervised or semi)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixupConfig {
    /// Attention width; the message width `d+p` when unset.
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub mode: Mode,
    pub epochs: usize,
    /// 128, or 32 for mixup, when unset.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub hidden: usize,
    pub layers: usize,
    pub readout: Readout,
    pub seed: u64,
    pub folds: usize,
    /// Bit rate of the random augmentor.
    pub rate: f64,
    /// Standard deviation of perturbation noise.
    pub noise_std: f64,
    pub label_fraction: f64,
    pub loss: LossConfig,
    pub mixup: MixupConfig,
    pub attgma: AttgmaConfig,
    pub probe: ProbeConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Drop,
            mode: Mode::Unsupervised,
            epochs: 100,
            batch_size: None,
            learning_rate: 0.001,
            hidden: 64,
            layers: 3,
            readout: Readout::Sum,
            seed: 0,
            folds: 10,
            rate: 0.2,
            noise_std: 1.0,
            label_fraction: 0.1,
            loss: LossConfig::default(),
            mixup: MixupConfig::default(),
            attgma: AttgmaConfig::default(),
            probe: ProbeConfig::default(),
        }
    }
}

impl TrainConfig {
    /// The larger configuration: 5 layers, 128 hidden units, 500 epochs.
    pub fn paper_scale(mut self) -> Self {
        self.layers = 5;
        self.hidden = 128;
        self.epochs = 500;
        self
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
            .unwrap_or(if self.variant == Variant::Mixup { 32 } else { 128 })
    }

    /// The same configuration with every default made explicit.
    pub fn resolved(&self, width: usize) -> Self {
        let mut c = self.clone();
        c.batch_size = Some(self.batch_size());
        if c.variant == Variant::Mixup && c.mixup.k.is_none() {
            c.mixup.k = Some(width);
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size() < 2 {
            return bad(format!("batch size must be at least 2, got {}", self.batch_size()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.hidden == 0 || self.layers == 0 {
            return bad("hidden and layers must be positive".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if !(0.0..=1.0).contains(&self.rate) {
            return bad(format!("rate must lie in [0, 1], got {}", self.rate));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be non-negative, got {}", self.noise_std));
        }
        if self.mode == Mode::SemiSupervised && !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return bad(format!("label_fraction must lie in (0, 1], got {}", self.label_fraction));
        }
        if self.attgma.enabled && self.attgma.hidden == 0 {
            return bad("attgma.hidden must be positive".into());
        }
        self.loss.validate()
    }

    pub fn model_spec(&self, node_dim: usize, edge_dim: usize, num_classes: usize) -> ModelSpec {
        let width = node_dim + edge_dim;
        ModelSpec {
            node_dim,
            edge_dim,
            num_classes,
            hidden: self.hidden,
            layers: self.layers,
            readout: self.readout,
            mixup_k: (self.variant == Variant::Mixup).then(|| self.mixup.k.unwrap_or(width)),
            attgma_hidden: self.attgma.enabled.then_some(self.attgma.hidden),
            gumbel_temperature: self.attgma.gumbel_temperature,
        }
    }
}

/// RNG for one independent stream (training run or fold) of a root seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs independent folds, possibly in parallel. Results come back in fold
/// order.
pub trait FoldExecutor {
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs folds one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl FoldExecutor for Sequential {
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}

/// Statistics of one optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub contrastive: f64,
    pub classification: Option<f64>,
    /// Gradient-tracking leaves on the step's tape; equals the number of
    /// parameter tensors when both branches share weights.
    pub tape_params: usize,
}

/// Labels of the batch graphs that have them: positions within the batch and
/// their classes.
#[derive(Clone, Debug, Default)]
pub struct BatchLabels {
    pub positions: Arc<[usize]>,
    pub labels: Arc<[usize]>,
}

impl BatchLabels {
    pub fn from_options(labels: &[Option<usize>]) -> Self {
        let (positions, labels): (Vec<usize>, Vec<usize>) = labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (i, l)))
            .unzip();
        BatchLabels {
            positions: positions.into(),
            labels: labels.into(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// One update of every parameter from a two-branch pass over `batch`.
///
/// `attribution`, when given, replaces the first pass of the learnable
/// augmentor (epoch caching).
pub fn train_step<R: Rng + ?Sized>(
    model: &mut Model,
    opt: &mut Adam,
    batch: &GraphBatch,
    labels: &BatchLabels,
    cfg: &TrainConfig,
    attribution: Option<&Matrix>,
    rng: &mut R,
) -> Result<StepStats> {
    if batch.num_graphs() < 2 {
        return Err(Error::arg("a training batch needs at least two graphs"));
    }
    let noise = StepNoise::draw(cfg.variant, batch, cfg.noise_std, rng)?;
    let attribution = match (&model.augmentor, attribution) {
        (None, _) => None,
        (Some(_), Some(a)) => Some(a.clone()),
        (Some(_), None) => {
            let parts = attgma::attribution_batch(model, batch, cfg.variant, &noise, &cfg.loss, FirstPass::Sampled, rng)?;
            Some(attgma::stack_attributions(&parts)?)
        }
    };

    let mut t = Tape::new();
    let b = model.store.bind(&mut t);
    let x = t.constant(batch.messages().clone());
    let theta = match (&model.augmentor, &attribution) {
        (Some(params), Some(a)) => {
            let p = attgma::probability_tape(&mut t, &b, params, batch)?;
            attgma::sample_indicator_tape(&mut t, p, a, params.gumbel_temperature, rng)?
        }
        _ => {
            let theta = random_indicator((batch.num_rows(), batch.width()), cfg.rate, rng)?;
            t.constant(theta.to_matrix())
        }
    };
    let x_aug = augment_messages(&mut t, &b, model, batch, cfg.variant, x, theta, &noise)?;
    let orig = forward_branch(&mut t, &b, model, batch, x)?;
    let aug = forward_branch(&mut t, &b, model, batch, x_aug)?;
    let class_terms = if labels.is_empty() {
        None
    } else {
        Some(ClassTerms {
            logits: t.row_gather(orig.logits, labels.positions.clone())?,
            logits_prime: t.row_gather(aug.logits, labels.positions.clone())?,
            labels: labels.labels.clone(),
        })
    };
    let parts = total_loss(&mut t, class_terms.as_ref(), orig.graph_embeddings, aug.graph_embeddings, &cfg.loss)?;
    let stats = StepStats {
        loss: t.scalar(parts.total)?,
        contrastive: t.scalar(parts.contrastive)?,
        classification: match (parts.cls, parts.cls_prime) {
            (Some(a), Some(c)) => Some(t.scalar(a)? + t.scalar(c)?),
            _ => None,
        },
        tape_params: t.num_params(),
    };
    t.backward(parts.total)?;
    opt.step(&mut model.store, &b.grads(&t));
    Ok(stats)
}

/// Message matrices of every graph in `dataset`.
pub fn dataset_messages(dataset: &GraphDataset) -> Result<Vec<MessageMatrix>> {
    dataset
        .graphs()
        .iter()
        .map(|g| build_messages(g, MessageFn::Concat))
        .collect()
}

fn batch_of(messages: &[MessageMatrix], idx: &[usize]) -> Result<GraphBatch> {
    let refs: Vec<&MessageMatrix> = idx.iter().map(|&i| &messages[i]).collect();
    GraphBatch::from_messages(&refs)
}

/// Trains `model` for `cfg.epochs` epochs over the graphs `train`;
/// `labels[i]` is the class of graph `i` when it may be used for supervision.
/// Returns the mean loss of every epoch.
pub fn fit<R: Rng + ?Sized>(
    model: &mut Model,
    messages: &[MessageMatrix],
    train: &[usize],
    labels: &[Option<usize>],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if labels.len() != messages.len() {
        return Err(Error::arg(format!("{} labels for {} graphs", labels.len(), messages.len())));
    }
    let mut opt = Adam::new(&model.store, cfg.learning_rate);
    let mut order = train.to_vec();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let chunks: Vec<&[usize]> = order.chunks(cfg.batch_size()).collect();
        let cached: Option<Vec<Matrix>> = if model.augmentor.is_some() && cfg.attgma.epoch_cache {
            let mut out = Vec::with_capacity(chunks.len());
            for chunk in &chunks {
                let batch = batch_of(messages, chunk)?;
                if batch.num_graphs() < 2 {
                    out.push(Matrix::zeros(0, 0));
                    continue;
                }
                let noise = StepNoise::draw(cfg.variant, &batch, cfg.noise_std, rng)?;
                let parts =
                    attgma::attribution_batch(model, &batch, cfg.variant, &noise, &cfg.loss, FirstPass::Sampled, rng)?;
                out.push(attgma::stack_attributions(&parts)?);
            }
            Some(out)
        } else {
            None
        };
        let (mut total, mut steps) = (0.0, 0usize);
        for (ci, chunk) in chunks.iter().enumerate() {
            if chunk.len() < 2 {
                log::warn!("epoch {epoch}: skipping a batch of {} graph", chunk.len());
                continue;
            }
            let batch = batch_of(messages, chunk)?;
            let batch_labels: Vec<Option<usize>> = chunk.iter().map(|&i| labels[i]).collect();
            let bl = BatchLabels::from_options(&batch_labels);
            let a = cached.as_ref().map(|c| &c[ci]);
            let stats = train_step(model, &mut opt, &batch, &bl, cfg, a, rng)?;
            total += stats.loss;
            steps += 1;
        }
        let mean = if steps > 0 { total / steps as f64 } else { f64::NAN };
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        history.push(mean);
    }
    Ok(history)
}

/// Graph embeddings of `messages` from the original-message branch, in
/// chunks of `chunk` graphs.
pub fn embed_all(model: &Model, messages: &[MessageMatrix], chunk: usize) -> Result<Matrix> {
    let idx: Vec<usize> = (0..messages.len()).collect();
    let parts = idx
        .chunks(chunk.max(1))
        .map(|c| model.embed(&batch_of(messages, c)?))
        .collect::<Result<Vec<_>>>()?;
    Matrix::vstack(&parts.iter().collect::<Vec<_>>())
}

/// Accuracy of the model's classifier on the graphs `idx`.
pub fn classifier_accuracy(model: &Model, messages: &[MessageMatrix], idx: &[usize], labels: &[usize]) -> Result<f64> {
    let mut pred = Vec::with_capacity(idx.len());
    for c in idx.chunks(256) {
        let p = model.predict(&batch_of(messages, c)?)?;
        pred.extend(crate::losses::pseudo_labels(&p));
    }
    let truth: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
    probe::accuracy(&pred, &truth)
}

/// Stratified `(train, test)` index sets. Members of each class are shuffled
/// and dealt round-robin across folds, continuing the rotation from class to
/// class so fold sizes differ by at most one.
pub fn kfold_split(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let n = labels.len();
    if folds < 2 || folds > n {
        return Err(Error::Config(format!("cannot split {n} graphs into {folds} folds")));
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let classes: BTreeSet<usize> = labels.iter().copied().collect();
    let members = |c: usize| -> Vec<usize> { (0..n).filter(|&i| labels[i] == c).collect() };
    let stratified = classes.iter().all(|&c| members(c).len() >= folds);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    if stratified {
        for &c in &classes {
            let mut m = members(c);
            m.shuffle(&mut rng);
            order.extend(m);
        }
    } else {
        log::warn!("a class has fewer than {folds} graphs; using an unstratified split");
        order.extend(0..n);
        order.shuffle(&mut rng);
    }
    let mut test = vec![Vec::new(); folds];
    for (k, &i) in order.iter().enumerate() {
        test[k % folds].push(i);
    }
    Ok(test
        .into_iter()
        .map(|mut te| {
            te.sort_unstable();
            let held: BTreeSet<usize> = te.iter().copied().collect();
            let tr = (0..n).filter(|i| !held.contains(i)).collect();
            (tr, te)
        })
        .collect())
}

/// Labeled subset of `train`: `round(fraction · total)` graphs (capped by
/// `train.len()`), with at least one graph of every class present in `train`.
pub fn labeled_subset<R: Rng + ?Sized>(
    train: &[usize],
    labels: &[usize],
    num_classes: usize,
    fraction: f64,
    total: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for &i in train {
        by_class[labels[i]].push(i);
    }
    let mut chosen = Vec::new();
    let mut rest = Vec::new();
    for (c, m) in by_class.iter_mut().enumerate() {
        if m.is_empty() {
            log::warn!("class {c} has no training graphs in this fold");
            continue;
        }
        m.shuffle(rng);
        chosen.push(m[0]);
        rest.extend_from_slice(&m[1..]);
    }
    rest.sort_unstable();
    rest.shuffle(rng);
    let want = (libm::round(fraction * total as f64) as usize).clamp(chosen.len(), train.len());
    chosen.extend(rest.into_iter().take(want - chosen.len()));
    chosen.sort_unstable();
    chosen
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub dataset: String,
    pub variant: Variant,
    pub folds: Vec<f64>,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub seed: u64,
    pub config: TrainConfig,
    pub wall_s: Option<f64>,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

impl RunReport {
    pub fn new(task: &str, dataset: &str, folds: Vec<f64>, config: TrainConfig) -> Self {
        let (mean_acc, std_acc) = mean_std(&folds);
        RunReport {
            task: task.into(),
            dataset: dataset.into(),
            variant: config.variant,
            folds,
            mean_acc,
            std_acc,
            seed: config.seed,
            config,
            wall_s: None,
        }
    }

    /// Checks the stored mean and deviation against the fold accuracies.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let (m, s) = mean_std(&self.folds);
        if self.folds.is_empty() || (m - self.mean_acc).abs() > tol || (s - self.std_acc).abs() > tol {
            return Err(Error::Config(format!(
                "report mean/std ({}, {}) do not match folds ({m}, {s})",
                self.mean_acc, self.std_acc
            )));
        }
        Ok(())
    }
}

/// Models and report of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub models: Vec<Model>,
    pub report: RunReport,
    pub loss_history: Vec<Vec<f64>>,
}

fn check_dataset(dataset: &GraphDataset, cfg: &TrainConfig) -> Result<Vec<usize>> {
    let labels = dataset.labels()?;
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::arg("evaluation needs at least two classes in the dataset"));
    }
    if cfg.folds > dataset.len() {
        return Err(Error::Config(format!("{} folds for {} graphs", cfg.folds, dataset.len())));
    }
    Ok(labels)
}

/// Contrastive training of one model on graphs alone; no labels are passed.
pub fn train_contrastive(messages: &[MessageMatrix], spec: ModelSpec, cfg: &TrainConfig) -> Result<(Model, Vec<f64>)> {
    let mut rng = stream_rng(cfg.seed, 0);
    let mut model = Model::new(spec, &mut rng)?;
    let all: Vec<usize> = (0..messages.len()).collect();
    let history = fit(&mut model, messages, &all, &vec![None; messages.len()], cfg, &mut rng)?;
    Ok((model, history))
}

/// Per-fold probe accuracies of frozen embeddings.
pub fn probe_folds<E: FoldExecutor>(
    embeddings: &Matrix,
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
    exec: &E,
) -> Result<Vec<f64>> {
    let splits = kfold_split(labels, cfg.folds, cfg.seed)?;
    exec.run(splits.len(), |k| {
        let (tr, te) = &splits[k];
        let ytr: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
        let yte: Vec<usize> = te.iter().map(|&i| labels[i]).collect();
        let p = LogisticProbe::fit(&embeddings.select_rows(tr), &ytr, num_classes, &cfg.probe)?;
        p.accuracy(&embeddings.select_rows(te), &yte)
    })
    .into_iter()
    .collect()
}

/// Contrastive training on every graph, then a k-fold logistic probe on the
/// frozen graph embeddings.
pub fn train_unsupervised<E: FoldExecutor>(
    dataset: &GraphDataset,
    name: &str,
    cfg: &TrainConfig,
    exec: &E,
) -> Result<TrainOutcome> {
    let cfg = cfg.resolved(dataset.node_dim() + dataset.edge_dim());
    cfg.validate()?;
    let labels = check_dataset(dataset, &cfg)?;
    let messages = dataset_messages(dataset)?;
    let spec = cfg.model_spec(dataset.node_dim(), dataset.edge_dim(), dataset.num_classes());
    let (model, history) = train_contrastive(&messages, spec, &cfg)?;
    let emb = embed_all(&model, &messages, 256)?;
    let folds = probe_folds(&emb, &labels, dataset.num_classes(), &cfg, exec)?;
    let mut cfg = cfg;
    cfg.mode = Mode::Unsupervised;
    Ok(TrainOutcome {
        models: vec![model],
        report: RunReport::new(Mode::Unsupervised.name(), name, folds, cfg),
        loss_history: vec![history],
    })
}

/// Per fold: joint training with labels on a `label_fraction` slice of the
/// training graphs and contrast on all training graphs; accuracy of the
/// original-branch classifier on the held-out fold.
pub fn train_semisupervised<E: FoldExecutor>(
    dataset: &GraphDataset,
    name: &str,
    cfg: &TrainConfig,
    exec: &E,
) -> Result<TrainOutcome> {
    let mut cfg = cfg.resolved(dataset.node_dim() + dataset.edge_dim());
    cfg.mode = Mode::SemiSupervised;
    cfg.validate()?;
    let labels = check_dataset(dataset, &cfg)?;
    let messages = dataset_messages(dataset)?;
    let splits = kfold_split(&labels, cfg.folds, cfg.seed)?;
    let spec = cfg.model_spec(dataset.node_dim(), dataset.edge_dim(), dataset.num_classes());
    let results = exec.run(splits.len(), |k| -> Result<(Model, Vec<f64>, f64)> {
        let (tr, te) = &splits[k];
        let mut rng = stream_rng(cfg.seed, k as u64 + 1);
        let labeled = labeled_subset(tr, &labels, dataset.num_classes(), cfg.label_fraction, dataset.len(), &mut rng);
        let mut visible = vec![None; messages.len()];
        for &i in &labeled {
            visible[i] = Some(labels[i]);
        }
        let mut model = Model::new(spec.clone(), &mut rng)?;
        let history = fit(&mut model, &messages, tr, &visible, &cfg, &mut rng)?;
        let acc = classifier_accuracy(&model, &messages, te, &labels)?;
        Ok((model, history, acc))
    });
    let mut models = Vec::new();
    let mut histories = Vec::new();
    let mut folds = Vec::new();
    for r in results {
        let (m, h, a) = r?;
        models.push(m);
        histories.push(h);
        folds.push(a);
    }
    Ok(TrainOutcome {
        models,
        report: RunReport::new(Mode::SemiSupervised.name(), name, folds, cfg),
        loss_history: histories,
    })
}

pub fn train<E: FoldExecutor>(dataset: &GraphDataset, name: &str, cfg: &TrainConfig, exec: &E) -> Result<TrainOutcome> {
    match cfg.mode {
        Mode::Unsupervised => train_unsupervised(dataset, name, cfg, exec),
        Mode::SemiSupervised => train_semisupervised(dataset, name, cfg, exec),
    }
}
