//! Synthetic datasets and the dataset file format.

mod file;
mod synth;

use std::collections::BTreeSet;

pub use file::{load_dataset, save_dataset, DatasetText};
pub use synth::{make_two_moons, make_zero_shot_gaussians, ZeroShotConfig};

use crate::error::{Error, Result};
use crate::numgrad::Matrix;
use crate::pooling::FeatureMap;

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    /// One row per sample.
    Points(Matrix),
    FeatureMaps(Vec<FeatureMap>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Points(m) => m.rows(),
            Samples::FeatureMaps(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Samples,
    pub labels: Vec<u32>,
    pub class_names: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(samples: Samples, labels: Vec<u32>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::param(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if let Samples::FeatureMaps(maps) = &samples {
            if let Some(first) = maps.first() {
                let shape = (first.spatial(), first.channels());
                if maps.iter().any(|m| (m.spatial(), m.channels()) != shape) {
                    return Err(Error::param("feature maps differ in shape"));
                }
            }
        }
        Ok(Self {
            samples,
            labels,
            class_names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct class ids, ascending.
    pub fn classes(&self) -> Vec<u32> {
        self.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn feature_maps(&self) -> Option<&[FeatureMap]> {
        match &self.samples {
            Samples::FeatureMaps(v) => Some(v),
            Samples::Points(_) => None,
        }
    }

    pub fn points(&self) -> Option<&Matrix> {
        match &self.samples {
            Samples::Points(m) => Some(m),
            Samples::FeatureMaps(_) => None,
        }
    }

    /// `(M, E)` for feature-map datasets.
    pub fn map_shape(&self) -> Option<(usize, usize)> {
        self.feature_maps()
            .and_then(|m| m.first())
            .map(|f| (f.spatial(), f.channels()))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let samples = match &self.samples {
            Samples::Points(m) => Samples::Points(m.select_rows(indices)),
            Samples::FeatureMaps(v) => Samples::FeatureMaps(indices.iter().map(|&i| v[i].clone()).collect()),
        };
        Self {
            samples,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Samples whose class is in `classes`, in original order.
    pub fn with_classes(&self, classes: &[u32]) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect();
        self.subset(&idx)
    }
}

#[cfg(test)]
mod tests;
