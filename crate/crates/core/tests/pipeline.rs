//! End-to-end checks through the public API: generate, persist, train, reload, evaluate.

use proptest::prelude::*;
use proxylab::data::{load_dataset, make_zero_shot_gaussians, save_dataset, ZeroShotConfig};
use proxylab::embedder::{embed_pooled, init_params, Checkpoint};
use proxylab::evalkit::{evaluate, load_embeddings, save_embeddings, EmbeddingSet, Protocol, NMI_SEEDS};
use proxylab::losses::LossKind;
use proxylab::rng::SeededRng;
use proxylab::training::{
    feature_width, fit, pooled_features, two_stage_fit, BatchSampler, Model, OptimConfig, Schedule, TrainSpec,
};
use proxylab::Matrix;

fn small_data() -> ZeroShotConfig {
    ZeroShotConfig {
        num_classes: 16,
        per_class: 6,
        channels: 12,
        ..ZeroShotConfig::default()
    }
}

fn spec(epochs: usize) -> TrainSpec {
    TrainSpec {
        loss: LossKind::ProxyNcaPp,
        emb_dim: 8,
        pool_k: 1,
        use_layer_norm: true,
        sampler: BatchSampler::ClassBalanced {
            batch_size: 16,
            classes_per_batch: 4,
        },
        optim: OptimConfig {
            base_lr: 0.01,
            proxy_lr: 0.1,
            momentum: 0.0,
            epochs,
            temperature: 1.0 / 9.0,
        },
        patience: 4,
        decay_factor: 0.5,
    }
}

#[test]
fn training_on_a_reloaded_dataset_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = make_zero_shot_gaussians(&small_data()).unwrap();
    let path = dir.path().join("train.txt");
    save_dataset(&train, &path).unwrap();
    let reloaded = load_dataset(&path).unwrap();
    assert_eq!(reloaded, train);

    let s = spec(3);
    let run = |data| {
        let model = Model::init(&s, feature_width(data), &data.classes(), 5).unwrap();
        fit(data, None, model, &s, 5, &Schedule::Plateau).unwrap()
    };
    let (a, b) = (run(&train), run(&reloaded));
    assert_eq!(a.model.embedder, b.model.embedder);
    assert_eq!(a.schedule_hash, b.schedule_hash);
}

#[test]
fn checkpoint_round_trip_reproduces_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = make_zero_shot_gaussians(&small_data()).unwrap();
    let report = two_stage_fit(&train, &spec(4), 1).unwrap();
    let model = report.stage2.model;
    let path = dir.path().join("ckpt.json");
    Checkpoint::new(1, serde_json::json!({ "note": "test" }), model.embedder.clone(), model.bank.clone())
        .save(&path)
        .unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.embedder, model.embedder);
    assert_eq!(loaded.proxies, model.bank);

    let pooled = pooled_features(&test, 1).unwrap();
    let before = embed_pooled(&pooled, &model.embedder).unwrap().value;
    let after = embed_pooled(&pooled, &loaded.embedder).unwrap().value;
    assert_eq!(before, after);

    let set = EmbeddingSet::new(after, test.labels.clone()).unwrap();
    let emb_path = dir.path().join("emb.txt");
    save_embeddings(&set, &emb_path).unwrap();
    let back = load_embeddings(&emb_path).unwrap();
    assert_eq!(back, set);
    let a = evaluate(&before, &test.labels, &[1, 2], Protocol::SameSet, &NMI_SEEDS).unwrap();
    let b = evaluate(&back.embeddings, &back.labels, &[1, 2], Protocol::SameSet, &NMI_SEEDS).unwrap();
    assert_eq!(a.recall_at, b.recall_at);
    assert_eq!(a.nmi, b.nmi);
}

#[test]
fn wrong_width_features_are_a_shape_error() {
    let params = init_params(12, 8, 0).unwrap();
    let err = embed_pooled(&Matrix::zeros(3, 11), &params).unwrap_err();
    assert!(matches!(err, proxylab::Error::Shape { .. }), "{err}");
}

proptest! {
    #[test]
    fn embeddings_are_unit_rows(seed in any::<u64>(), channels in 2usize..20, dim in 2usize..12, rows in 1usize..8, ln in any::<bool>()) {
        let mut rng = SeededRng::new(seed);
        let x = Matrix::from_fn(rows, channels, |_, _| rng.normal() * 3.0);
        let params = init_params(channels, dim, seed).unwrap().with_layer_norm(ln);
        let out = embed_pooled(&x, &params).unwrap().value;
        for r in out.iter_rows() {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert!(r.iter().all(|v| v.is_finite()));
        }
    }
}
