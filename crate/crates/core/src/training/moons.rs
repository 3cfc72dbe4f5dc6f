use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::embedder::{toy_forward, ToyBackbone};
use crate::error::{Error, Result};
use crate::numgrad::{log_softmax_rows, Matrix};
use crate::rng::{SeededRng, Stream};

use super::optim::{OptimConfig, ParamGroup, TwoGroupSgd};
use super::sampler::BatchSampler;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub momentum: f64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.05,
            batch_size: 32,
            momentum: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyFit {
    pub net: ToyBackbone,
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
}

/// Mean of `−log softmax(logits / T)[label]` and its gradient w.r.t. the logits.
pub fn temperature_cross_entropy(logits: &Matrix, labels: &[u32], temperature: f64) -> Result<(f64, Matrix)> {
    if labels.len() != logits.rows() {
        return Err(Error::Shape {
            op: "temperature_cross_entropy",
            left: logits.shape(),
            right: (labels.len(), 1),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= logits.cols()) {
        return Err(Error::Labeling(format!("label {bad} out of range for {} logits", logits.cols())));
    }
    let lsm = log_softmax_rows(logits, temperature)?;
    let n = labels.len() as f64;
    let mut g = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        loss -= lsm.value[(i, l as usize)];
        g[(i, l as usize)] = -1.0 / n;
    }
    Ok((loss / n, lsm.pullback(&g)))
}

fn accuracy(logits: &Matrix, labels: &[u32]) -> f64 {
    let hits = logits
        .iter_rows()
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l as usize)
        .count();
    hits as f64 / labels.len() as f64
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Trains the 2→100→2 classifier with temperature-scaled cross-entropy.
pub fn train_toy_classifier(data: &LabeledDataset, temperature: f64, cfg: &ToyTrainConfig, seed: u64) -> Result<ToyFit> {
    let points = data
        .points()
        .ok_or_else(|| Error::config("toy classifier needs 2-D points"))?;
    let mut net = ToyBackbone::init(seed);
    let sampler = BatchSampler::Uniform {
        batch_size: cfg.batch_size,
    };
    let mut rng = SeededRng::for_stream(seed, Stream::Sampler);
    let mut sgd = TwoGroupSgd::new(&OptimConfig {
        base_lr: cfg.lr,
        proxy_lr: cfg.lr,
        momentum: cfg.momentum,
        epochs: cfg.epochs,
        temperature,
    });
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let batches = sampler.epoch(&data.labels, &mut rng)?;
        let mut total = 0.0;
        for batch in &batches {
            let x = points.select_rows(batch);
            let y: Vec<u32> = batch.iter().map(|&i| data.labels[i]).collect();
            let out = toy_forward(&x, &net)?;
            let (loss, g) = temperature_cross_entropy(&out.value, &y, temperature)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("toy training loss"));
            }
            total += loss;
            let grads = out.pullback(&g);
            for (slot, (p, g)) in net.blocks_mut().into_iter().zip(grads.blocks()).enumerate() {
                sgd.update(slot, ParamGroup::Base, p, g, 1.0)?;
            }
        }
        epoch_losses.push(total / batches.len() as f64);
    }
    let train_accuracy = accuracy(&toy_forward(points, &net)?.value, &data.labels);
    Ok(ToyFit {
        net,
        epoch_losses,
        train_accuracy,
    })
}

/// Fraction of points whose largest logit matches the label.
pub fn toy_accuracy(net: &ToyBackbone, data: &LabeledDataset) -> Result<f64> {
    let points = data
        .points()
        .ok_or_else(|| Error::config("toy classifier needs 2-D points"))?;
    Ok(accuracy(&toy_forward(points, net)?.value, &data.labels))
}

/// Regular grid over a rectangle, `nx × ny` points including the corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lattice {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Lattice {
    fn default() -> Self {
        Self {
            x_min: -1.5,
            x_max: 2.5,
            y_min: -1.0,
            y_max: 1.5,
            nx: 81,
            ny: 51,
        }
    }
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major points, `x` varying fastest.
    pub fn points(&self) -> Result<Matrix> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::config("lattice needs >= 2 points per axis"));
        }
        let step = |lo: f64, hi: f64, n: usize, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        Ok(Matrix::from_fn(self.len(), 2, |r, c| {
            if c == 0 {
                step(self.x_min, self.x_max, self.nx, r % self.nx)
            } else {
                step(self.y_min, self.y_max, self.ny, r / self.nx)
            }
        }))
    }
}

/// Rows of `[x, y, p(class 0), p(class 1)]` under `softmax(logits / T)`.
pub fn lattice_probabilities(net: &ToyBackbone, temperature: f64, lattice: &Lattice) -> Result<Matrix> {
    let pts = lattice.points()?;
    let lsm = log_softmax_rows(&toy_forward(&pts, net)?.value, temperature)?.value;
    Ok(Matrix::from_fn(pts.rows(), 4, |r, c| match c {
        0 | 1 => pts[(r, c)],
        _ => lsm[(r, c - 2)].exp(),
    }))
}
