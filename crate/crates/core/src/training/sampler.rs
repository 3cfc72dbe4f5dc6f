use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeededRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub classes_per_batch: usize,
    pub seed: u64,
}

/// How an epoch is cut into batches. Both variants emit `⌈N / N_b⌉` batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BatchSampler {
    /// `classes_per_batch` distinct classes with `⌊N_b / N_c⌋` samples each.
    ClassBalanced { batch_size: usize, classes_per_batch: usize },
    /// A fresh shuffle of all samples, cut into consecutive chunks.
    Uniform { batch_size: usize },
}

impl BatchSampler {
    pub fn batch_size(&self) -> usize {
        match *self {
            BatchSampler::ClassBalanced { batch_size, .. } | BatchSampler::Uniform { batch_size } => batch_size,
        }
    }

    pub fn batches_per_epoch(&self, samples: usize) -> usize {
        samples.div_ceil(self.batch_size().max(1))
    }

    pub fn epoch(&self, labels: &[u32], rng: &mut SeededRng) -> Result<Vec<Vec<usize>>> {
        match *self {
            BatchSampler::ClassBalanced {
                batch_size,
                classes_per_batch,
            } => {
                let by_class = ClassIndex::new(labels);
                by_class.check(batch_size, classes_per_batch)?;
                Ok((0..self.batches_per_epoch(labels.len()))
                    .map(|_| by_class.draw(batch_size, classes_per_batch, rng))
                    .collect())
            }
            BatchSampler::Uniform { batch_size } => {
                if batch_size == 0 {
                    return Err(Error::config("batch size must be >= 1"));
                }
                let mut order: Vec<usize> = (0..labels.len()).collect();
                rng.shuffle(&mut order);
                Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
            }
        }
    }
}

struct ClassIndex {
    members: Vec<Vec<usize>>,
}

impl ClassIndex {
    fn new(labels: &[u32]) -> Self {
        let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            map.entry(l).or_default().push(i);
        }
        Self {
            members: map.into_values().collect(),
        }
    }

    fn check(&self, batch_size: usize, classes_per_batch: usize) -> Result<()> {
        if classes_per_batch == 0 || batch_size / classes_per_batch == 0 {
            return Err(Error::config(format!(
                "batch size {batch_size} with {classes_per_batch} classes per batch leaves no room for samples"
            )));
        }
        if classes_per_batch > self.members.len() {
            return Err(Error::config(format!(
                "{classes_per_batch} classes per batch but only {} classes available",
                self.members.len()
            )));
        }
        Ok(())
    }

    fn draw(&self, batch_size: usize, classes_per_batch: usize, rng: &mut SeededRng) -> Vec<usize> {
        let per_class = batch_size / classes_per_batch;
        let mut batch = Vec::with_capacity(per_class * classes_per_batch);
        for c in rng.sample_distinct(self.members.len(), classes_per_batch) {
            let members = &self.members[c];
            if members.len() >= per_class {
                batch.extend(rng.sample_distinct(members.len(), per_class).into_iter().map(|i| members[i]));
            } else {
                batch.extend((0..per_class).map(|_| members[rng.below(members.len())]));
            }
        }
        batch
    }
}

/// `num_batches` class-balanced batches, deterministic given `cfg.seed`.
pub fn class_balanced_batches(labels: &[u32], cfg: &SamplerConfig, num_batches: usize) -> Result<Vec<Vec<usize>>> {
    let index = ClassIndex::new(labels);
    index.check(cfg.batch_size, cfg.classes_per_batch)?;
    let mut rng = SeededRng::for_stream(cfg.seed, Stream::Sampler);
    Ok((0..num_batches)
        .map(|_| index.draw(cfg.batch_size, cfg.classes_per_batch, &mut rng))
        .collect())
}
