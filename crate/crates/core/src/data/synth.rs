use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Samples};
use crate::error::{Error, Result};
use crate::numgrad::Matrix;
use crate::pooling::FeatureMap;
use crate::rng::{SeededRng, Stream};

/// Two interleaving half circles.
///
/// Class 0 lies on `(cos θ, sin θ)`, class 1 on `(1 − cos θ, 0.5 − sin θ)`,
/// with θ on an evenly spaced grid over `[0, π]`; each coordinate then gets
/// independent `Normal(0, noise_sigma²)` noise. Points are ordered class 0
/// first.
pub fn make_two_moons(n: usize, noise_sigma: f64, seed: u64) -> Result<LabeledDataset> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::param(format!("two moons needs a positive even n, got {n}")));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::param("noise sigma must be >= 0"));
    }
    let half = n / 2;
    let theta = |i: usize| if half == 1 { 0.0 } else { PI * i as f64 / (half - 1) as f64 };
    let mut rng = SeededRng::for_stream(seed, Stream::Data);
    let mut points = Matrix::zeros(n, 2);
    for i in 0..n {
        let t = theta(i % half);
        let (x, y) = if i < half {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        points[(i, 0)] = x + noise_sigma * rng.normal();
        points[(i, 1)] = y + noise_sigma * rng.normal();
    }
    let labels = (0..n).map(|i| (i >= half) as u32).collect();
    LabeledDataset::new(Samples::Points(points), labels)
}

/// Recipe for the synthetic zero-shot benchmark.
///
/// Each class is a Gaussian blob in a `dim`-dimensional attribute space around
/// a random mean of norm `separation`; train and test classes share that
/// space. The latent point `z` appends `nuisance_dims` coordinates of large
/// variance (`nuisance_sigma`) that carry no class information, after an
/// optional one-hot class block of height `private_strength`. The object
/// activation `relu(L·z + object_offset)`, with a fixed random lift `L` of `E`
/// rows, is added at `object_size` random spatial positions on top of a
/// non-negative background `background·|Normal(0, 1)|` covering all `M²`
/// positions.
///
/// The defaults are the tuned benchmark used by the acceptance run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZeroShotConfig {
    pub num_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub spatial: usize,
    pub channels: usize,
    pub separation: f64,
    pub blob_sigma: f64,
    pub nuisance_dims: usize,
    pub nuisance_sigma: f64,
    pub background: f64,
    pub object_offset: f64,
    pub private_strength: f64,
    pub object_size: usize,
    pub seed: u64,
}

impl Default for ZeroShotConfig {
    fn default() -> Self {
        Self {
            num_classes: 20,
            per_class: 30,
            dim: 12,
            spatial: 4,
            channels: 32,
            separation: 6.0,
            blob_sigma: 1.0,
            nuisance_dims: 4,
            nuisance_sigma: 7.0,
            background: 0.5,
            object_offset: 5.0,
            private_strength: 0.0,
            object_size: 3,
            seed: 0,
        }
    }
}

fn unit_direction(dim: usize, rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Train split (first half of the classes) and test split (second half).
pub fn make_zero_shot_gaussians(cfg: &ZeroShotConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    if cfg.num_classes < 4 || !cfg.num_classes.is_multiple_of(2) {
        return Err(Error::param("num_classes must be even and >= 4"));
    }
    if cfg.per_class == 0 || cfg.dim == 0 || cfg.channels == 0 || cfg.spatial == 0 {
        return Err(Error::param("per_class, dim, channels and spatial must be >= 1"));
    }
    if cfg.object_size == 0 || cfg.object_size > cfg.spatial * cfg.spatial {
        return Err(Error::param("object_size must be within 1..=M²"));
    }
    if !(cfg.separation >= 0.0 && cfg.blob_sigma >= 0.0 && cfg.nuisance_sigma >= 0.0 && cfg.background >= 0.0) {
        return Err(Error::param("scales must be >= 0"));
    }
    let mut rng = SeededRng::for_stream(cfg.seed, Stream::Data);
    let latent = cfg.dim + cfg.num_classes + cfg.nuisance_dims;
    let lift = Matrix::from_fn(cfg.channels, latent, |_, _| rng.normal() / (latent as f64).sqrt());
    let means: Vec<Vec<f64>> = (0..cfg.num_classes)
        .map(|_| unit_direction(cfg.dim, &mut rng).into_iter().map(|x| x * cfg.separation).collect())
        .collect();

    let positions = cfg.spatial * cfg.spatial;
    let mut maps = Vec::with_capacity(cfg.num_classes * cfg.per_class);
    let mut labels = Vec::with_capacity(maps.capacity());
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let mut z: Vec<f64> = mean.iter().map(|m| m + cfg.blob_sigma * rng.normal()).collect();
            z.extend((0..cfg.num_classes).map(|c| if c == class { cfg.private_strength } else { 0.0 }));
            z.extend((0..cfg.nuisance_dims).map(|_| cfg.nuisance_sigma * rng.normal()));
            let object: Vec<f64> = lift
                .iter_rows()
                .map(|row| (row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + cfg.object_offset).max(0.0))
                .collect();
            let mut data = Matrix::from_fn(positions, cfg.channels, |_, _| 0.0);
            for v in data.as_mut_slice() {
                *v = cfg.background * rng.normal().abs();
            }
            for p in rng.sample_distinct(positions, cfg.object_size) {
                data.row_mut(p).iter_mut().zip(&object).for_each(|(v, o)| *v += o);
            }
            maps.push(FeatureMap::new(cfg.spatial, data)?);
            labels.push(class as u32);
        }
    }
    let all = LabeledDataset::new(Samples::FeatureMaps(maps), labels)?;
    let half = (cfg.num_classes / 2) as u32;
    let train: Vec<u32> = (0..half).collect();
    let test: Vec<u32> = (half..cfg.num_classes as u32).collect();
    Ok((all.with_classes(&train), all.with_classes(&test)))
}
