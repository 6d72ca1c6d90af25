use gma_core::gnn::GraphBatch;
use gma_core::linalg::Matrix;
use gma_core::model::{Model, Variant};
use gma_core::params::Adam;
use gma_core::probe::LogisticProbe;
use gma_core::synthetic;
use gma_core::trainer::{
    self, dataset_messages, embed_all, fit, stream_rng, train_contrastive, train_semisupervised, train_step,
    BatchLabels, Mode, Sequential, TrainConfig,
};
use gma_core::{AttributedGraph, GraphDataset, MessageMatrix};

fn fixture(n: usize, seed: u64) -> GraphDataset {
    synthetic::cycles_vs_stars(n, &mut stream_rng(seed, 7)).unwrap()
}

fn quick(variant: Variant) -> TrainConfig {
    TrainConfig {
        variant,
        epochs: 20,
        hidden: 32,
        layers: 2,
        batch_size: Some(32),
        learning_rate: 0.01,
        folds: 5,
        ..TrainConfig::default()
    }
}

fn batch(msgs: &[MessageMatrix], idx: &[usize]) -> GraphBatch {
    GraphBatch::from_messages(&idx.iter().map(|&i| &msgs[i]).collect::<Vec<_>>()).unwrap()
}

#[test]
fn loss_trends_down_over_fifty_steps() {
    let ds = fixture(64, 1);
    let msgs = dataset_messages(&ds).unwrap();
    for variant in [Variant::Drop, Variant::Perturb, Variant::Mixup] {
        let cfg = quick(variant);
        let mut rng = stream_rng(3, 0);
        let mut model = Model::new(cfg.model_spec(1, 0, 2), &mut rng).unwrap();
        let mut opt = Adam::new(&model.store, cfg.learning_rate);
        let idx: Vec<usize> = (0..32).collect();
        let b = batch(&msgs, &idx);
        let losses: Vec<f64> = (0..50)
            .map(|_| {
                train_step(&mut model, &mut opt, &b, &BatchLabels::default(), &cfg, None, &mut rng)
                    .unwrap()
                    .loss
            })
            .collect();
        assert!(losses.iter().all(|l| l.is_finite()));
        let head: f64 = losses[..10].iter().sum::<f64>() / 10.0;
        let tail: f64 = losses[40..].iter().sum::<f64>() / 10.0;
        assert!(tail < head, "{variant}: leading {head}, trailing {tail}");
    }
}

#[test]
fn same_seed_same_parameters() {
    let ds = fixture(40, 2);
    let msgs = dataset_messages(&ds).unwrap();
    let mut cfg = quick(Variant::Mixup);
    cfg.epochs = 3;
    cfg.attgma.enabled = true;
    let run = || train_contrastive(&msgs, cfg.model_spec(1, 0, 2), &cfg).unwrap().0;
    let (a, b) = (run(), run());
    assert_eq!(a.store, b.store);
}

#[test]
fn unsupervised_training_ignores_labels() {
    let ds = fixture(40, 3);
    let poisoned: Vec<AttributedGraph> = ds
        .graphs()
        .iter()
        .enumerate()
        .map(|(i, g)| g.clone().with_label(Some(i % 2)))
        .collect();
    let bad = GraphDataset::new(poisoned, 2, 1, 0).unwrap();
    let cfg = TrainConfig { epochs: 3, ..quick(Variant::Drop) };
    let embed = |d: &GraphDataset| {
        let msgs = dataset_messages(d).unwrap();
        let (model, _) = train_contrastive(&msgs, cfg.model_spec(1, 0, 2), &cfg).unwrap();
        embed_all(&model, &msgs, 16).unwrap()
    };
    assert_eq!(embed(&ds), embed(&bad));
}

#[test]
fn weight_sharing_on_every_variant() {
    let ds = fixture(8, 4);
    let msgs = dataset_messages(&ds).unwrap();
    for variant in [Variant::Drop, Variant::Perturb, Variant::Mixup] {
        for attgma in [false, true] {
            let mut cfg = quick(variant);
            cfg.attgma.enabled = attgma;
            let mut rng = stream_rng(5, 0);
            let mut model = Model::new(cfg.model_spec(1, 0, 2), &mut rng).unwrap();
            let mut opt = Adam::new(&model.store, cfg.learning_rate);
            let labels = BatchLabels::from_options(&[Some(0), None, Some(1), None]);
            let s = train_step(&mut model, &mut opt, &batch(&msgs, &[0, 1, 2, 3]), &labels, &cfg, None, &mut rng)
                .unwrap();
            assert_eq!(s.tape_params, model.store.len());
            assert!(s.classification.is_some());
        }
    }
}

#[test]
fn alpha_zero_is_supervised_only() {
    let ds = fixture(8, 5);
    let msgs = dataset_messages(&ds).unwrap();
    let mut cfg = quick(Variant::Drop);
    cfg.loss.alpha = 0.0;
    let mut rng = stream_rng(6, 0);
    let mut model = Model::new(cfg.model_spec(1, 0, 2), &mut rng).unwrap();
    let mut opt = Adam::new(&model.store, cfg.learning_rate);
    let labels = BatchLabels::from_options(&[Some(0), Some(1), None, None]);
    let s = train_step(&mut model, &mut opt, &batch(&msgs, &[0, 1, 2, 3]), &labels, &cfg, None, &mut rng).unwrap();
    assert_eq!(s.loss, s.classification.unwrap());
}

#[test]
fn untrained_probe_beats_majority_floor() {
    let ds = fixture(60, 6);
    let msgs = dataset_messages(&ds).unwrap();
    let cfg = quick(Variant::Drop);
    let model = Model::new(cfg.model_spec(1, 0, 2), &mut stream_rng(1, 0)).unwrap();
    let emb = embed_all(&model, &msgs, 32).unwrap();
    let labels = ds.labels().unwrap();
    let folds = trainer::probe_folds(&emb, &labels, 2, &cfg, &Sequential).unwrap();
    let mean = folds.iter().sum::<f64>() / folds.len() as f64;
    assert!(mean >= ds.majority_rate().unwrap() - 1e-12, "{mean}");
}

#[test]
fn unsupervised_probe_separates_cycles_from_stars() {
    let ds = fixture(200, 7);
    let msgs = dataset_messages(&ds).unwrap();
    let cfg = quick(Variant::Drop);
    let labels = ds.labels().unwrap();
    let (model, _) = train_contrastive(&msgs, cfg.model_spec(1, 0, 2), &cfg).unwrap();
    let emb = embed_all(&model, &msgs, 64).unwrap();
    let folds = trainer::probe_folds(&emb, &labels, 2, &cfg, &Sequential).unwrap();
    let mean = folds.iter().sum::<f64>() / folds.len() as f64;
    assert!(mean >= 0.95, "{folds:?}");
}

#[test]
fn full_labels_two_folds_is_supervised_cv() {
    let ds = fixture(40, 8);
    let cfg = TrainConfig {
        mode: Mode::SemiSupervised,
        label_fraction: 1.0,
        folds: 2,
        epochs: 50,
        ..quick(Variant::Drop)
    };
    let out = train_semisupervised(&ds, "synthetic", &cfg, &Sequential).unwrap();
    assert_eq!(out.report.folds.len(), 2);
    assert_eq!(out.models.len(), 2);
    out.report.validate(1e-12).unwrap();
    assert!(out.report.mean_acc >= 0.8, "{:?}", out.report.folds);
}

#[test]
fn probe_fit_uses_training_rows_only() {
    let x = Matrix::from_fn(6, 1, |i, _| i as f64);
    let y = [0, 0, 0, 1, 1, 1];
    let p = LogisticProbe::fit(&x, &y, 2, &Default::default()).unwrap();
    assert_eq!(p.predict(&x).unwrap(), y);
    let mut rng = stream_rng(0, 0);
    let msgs = dataset_messages(&fixture(4, 9)).unwrap();
    let cfg = quick(Variant::Drop);
    let mut model = Model::new(cfg.model_spec(1, 0, 2), &mut rng).unwrap();
    let h = fit(&mut model, &msgs, &[0, 1, 2, 3], &[None; 4], &TrainConfig { epochs: 2, ..cfg }, &mut rng).unwrap();
    assert_eq!(h.len(), 2);
}
