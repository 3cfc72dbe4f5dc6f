use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{LabeledDataset, Samples};
use crate::embedder::{embed_pooled, init_params, init_proxies, pool_batch, EmbedderParams, ProxyBank};
use crate::error::{Error, Result};
use crate::evalkit::recall_at_1;
use crate::losses::{evaluate_loss, BatchLabels, LossKind, ProxyNorm};
use crate::numgrad::Matrix;
use crate::pooling::FeatureMap;
use crate::rng::{SeededRng, Stream};

use super::optim::{OptimConfig, ParamGroup, TwoGroupSgd};
use super::plateau::PlateauState;
use super::sampler::BatchSampler;

pub const DEFAULT_PATIENCE: usize = 4;
pub const DEFAULT_DECAY_FACTOR: f64 = 0.5;

/// Everything `fit` needs besides data, parameters and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub loss: LossKind,
    pub emb_dim: usize,
    pub pool_k: usize,
    pub use_layer_norm: bool,
    pub sampler: BatchSampler,
    pub optim: OptimConfig,
    pub patience: usize,
    pub decay_factor: f64,
}

/// Embedding head plus proxy bank.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub embedder: EmbedderParams,
    pub bank: ProxyBank,
}

impl Model {
    pub fn init(spec: &TrainSpec, channels: usize, class_ids: &[u32], seed: u64) -> Result<Self> {
        let embedder = init_params(channels, spec.emb_dim, seed)?
            .with_pool_k(spec.pool_k)
            .with_layer_norm(spec.use_layer_norm);
        let bank = init_proxies(class_ids, spec.emb_dim, seed)?;
        Ok(Self { embedder, bank })
    }
}

/// How the learning-rate scale evolves across epochs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// Reduce on plateau of validation R@1; constant without a validation set.
    Plateau,
    /// Halve (by `decay_factor`) after each listed 1-based epoch.
    Replay(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    pub val_r1: Option<f64>,
    /// Scale applied to both learning rates during this epoch.
    pub lr_scale: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub log: Vec<EpochRecord>,
    pub initial_val_r1: Option<f64>,
    /// Epoch with the highest validation R@1 (first on ties); the last epoch
    /// when no validation set is given.
    pub best_epoch: usize,
    pub best_val_r1: Option<f64>,
    pub decay_epochs: Vec<usize>,
    /// SHA-256 over every emitted batch, in order.
    pub schedule_hash: String,
    pub model: Model,
}

/// Pooled `N×E` features of a dataset; 2-D points are taken as already pooled.
pub fn pooled_features(data: &LabeledDataset, k: usize) -> Result<Matrix> {
    match &data.samples {
        Samples::Points(m) => Ok(m.clone()),
        Samples::FeatureMaps(maps) => {
            let refs: Vec<&FeatureMap> = maps.iter().collect();
            let mut parts = Vec::new();
            for chunk in refs.chunks(256) {
                parts.push(pool_batch(chunk, k)?);
            }
            Matrix::vstack(&parts)
        }
    }
}

/// Width of a pooled feature row.
pub fn feature_width(data: &LabeledDataset) -> usize {
    match &data.samples {
        Samples::Points(m) => m.cols(),
        Samples::FeatureMaps(maps) => maps.first().map_or(0, FeatureMap::channels),
    }
}

fn validation_r1(pooled: &Matrix, labels: &[u32], params: &EmbedderParams) -> Result<f64> {
    let emb = embed_pooled(pooled, params)?.value;
    recall_at_1(&emb, labels)
}

fn hash_batch(hasher: &mut Sha256, batch: &[usize]) {
    hasher.update((batch.len() as u64).to_le_bytes());
    for &i in batch {
        hasher.update((i as u64).to_le_bytes());
    }
}

pub(crate) fn hex_digest(hasher: Sha256) -> String {
    format!("{:x}", hasher.finalize())
}

/// Trains `model` on `train` for `spec.optim.epochs` epochs.
pub fn fit(
    train: &LabeledDataset,
    val: Option<&LabeledDataset>,
    model: Model,
    spec: &TrainSpec,
    seed: u64,
    schedule: &Schedule,
) -> Result<FitReport> {
    spec.optim.validate()?;
    if train.classes().len() < 2 {
        return Err(Error::config("training needs >= 2 classes"));
    }
    let Model { mut embedder, mut bank } = model;
    let pooled = pooled_features(train, embedder.pool_k)?;
    let val_pooled = match val {
        Some(v) => Some((pooled_features(v, embedder.pool_k)?, v.labels.as_slice())),
        None => None,
    };
    let labels = &train.labels;
    if spec.loss.uses_proxies() {
        BatchLabels::new(labels, &bank)?;
    }

    let mut sampler_rng = SeededRng::for_stream(seed, Stream::Sampler);
    let mut sgd = TwoGroupSgd::new(&spec.optim);
    let mut plateau = PlateauState::new(spec.patience, spec.decay_factor);
    let mut lr_scale = 1.0;
    let mut decay_epochs = Vec::new();
    let mut hasher = Sha256::new();
    let mut log = Vec::with_capacity(spec.optim.epochs);

    let initial_val_r1 = match &val_pooled {
        Some((p, l)) => Some(validation_r1(p, l, &embedder)?),
        None => None,
    };

    for epoch in 1..=spec.optim.epochs {
        let batches = spec.sampler.epoch(labels, &mut sampler_rng)?;
        let mut loss_sum = 0.0;
        for batch in &batches {
            hash_batch(&mut hasher, batch);
            let x = pooled.select_rows(batch);
            let batch_labels: Vec<u32> = batch.iter().map(|&i| labels[i]).collect();
            let resolved = if spec.loss.uses_proxies() {
                BatchLabels::new(&batch_labels, &bank)?
            } else {
                BatchLabels::unresolved(&batch_labels)
            };
            let emb = embed_pooled(&x, &embedder)?;
            let loss = evaluate_loss(
                spec.loss,
                &emb.value,
                &resolved,
                &bank,
                spec.optim.temperature,
                ProxyNorm::Normalized,
            )?;
            if !loss.value.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            loss_sum += loss.value;
            let head = emb.pullback(&loss.grad_embeddings);
            sgd.update(0, ParamGroup::Base, &mut embedder.embed_weights, &head.weights, lr_scale)?;
            sgd.update(1, ParamGroup::Base, &mut embedder.embed_bias, &head.bias, lr_scale)?;
            if let Some(gp) = &loss.grad_proxies {
                sgd.update(2, ParamGroup::Proxy, &mut bank.proxies, gp, lr_scale)?;
            }
        }
        let val_r1 = match &val_pooled {
            Some((p, l)) => Some(validation_r1(p, l, &embedder)?),
            None => None,
        };
        log.push(EpochRecord {
            epoch,
            loss: loss_sum / batches.len().max(1) as f64,
            val_r1,
            lr_scale,
        });
        let decay = match (schedule, val_r1) {
            (Schedule::Plateau, Some(r1)) => plateau.step(r1),
            (Schedule::Plateau, None) => false,
            (Schedule::Replay(epochs), _) => epochs.contains(&epoch),
        };
        if decay {
            lr_scale *= spec.decay_factor;
            decay_epochs.push(epoch);
        }
    }

    let (best_epoch, best_val_r1) = best_of(&log);
    Ok(FitReport {
        log,
        initial_val_r1,
        best_epoch,
        best_val_r1,
        decay_epochs,
        schedule_hash: hex_digest(hasher),
        model: Model { embedder, bank },
    })
}

fn best_of(log: &[EpochRecord]) -> (usize, Option<f64>) {
    let mut best: Option<(usize, f64)> = None;
    for rec in log {
        if let Some(r1) = rec.val_r1 {
            if best.is_none_or(|(_, b)| r1 > b) {
                best = Some((rec.epoch, r1));
            }
        }
    }
    match best {
        Some((e, r1)) => (e, Some(r1)),
        None => (log.len(), None),
    }
}

#[derive(Debug, Clone)]
pub struct TwoStageReport {
    /// Trained on the first half of the classes, validated on the rest.
    pub stage1: FitReport,
    /// Retrained on every class for `stage1.best_epoch` epochs.
    pub stage2: FitReport,
}

impl TwoStageReport {
    pub fn stopping_epoch(&self) -> usize {
        self.stage1.best_epoch
    }
}

/// Splits the sorted class list in half: `(first, second)`.
pub fn class_halves(train: &LabeledDataset) -> Result<(Vec<u32>, Vec<u32>)> {
    let classes = train.classes();
    let half = classes.len() / 2;
    if half < 2 {
        return Err(Error::config(format!(
            "two-stage training needs >= 2 classes per half, got {} classes",
            classes.len()
        )));
    }
    Ok((classes[..half].to_vec(), classes[half..].to_vec()))
}

/// Early-stops on a class-disjoint split, then retrains on everything with the
/// recorded epoch count and decay schedule.
pub fn two_stage_fit(train: &LabeledDataset, spec: &TrainSpec, seed: u64) -> Result<TwoStageReport> {
    let (first, second) = class_halves(train)?;
    let channels = feature_width(train);
    let stage1_train = train.with_classes(&first);
    let stage1_val = train.with_classes(&second);
    let stage1 = fit(
        &stage1_train,
        Some(&stage1_val),
        Model::init(spec, channels, &first, seed)?,
        spec,
        seed,
        &Schedule::Plateau,
    )?;

    let stop = stage1.best_epoch;
    let replay: Vec<usize> = stage1.decay_epochs.iter().copied().filter(|&e| e <= stop).collect();
    let mut spec2 = spec.clone();
    spec2.optim.epochs = stop;
    let stage2 = fit(
        train,
        None,
        Model::init(spec, channels, &train.classes(), seed)?,
        &spec2,
        seed,
        &Schedule::Replay(replay),
    )?;
    Ok(TwoStageReport { stage1, stage2 })
}
