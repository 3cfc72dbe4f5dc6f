//! Global K-max pooling over `M×M×E` feature maps.
//!
//! Per channel the output is the mean of the `k` largest spatial activations.
//! `k = 1` is global max pooling, `k = M²` is global average pooling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::{GradPair, Matrix};

/// Spatial features of one sample: `M²` rows (flattened positions) by `E` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    spatial: usize,
    data: Matrix,
}

impl FeatureMap {
    pub fn new(spatial: usize, data: Matrix) -> Result<Self> {
        if spatial == 0 || data.rows() != spatial * spatial || data.cols() == 0 {
            return Err(Error::param(format!(
                "feature map with M={spatial} needs {} rows and >= 1 channel, got {:?}",
                spatial * spatial,
                data.shape()
            )));
        }
        Ok(Self { spatial, data })
    }

    pub fn spatial(&self) -> usize {
        self.spatial
    }

    pub fn positions(&self) -> usize {
        self.spatial * self.spatial
    }

    pub fn channels(&self) -> usize {
        self.data.cols()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Gap,
    Gmp,
    Kmax,
}

/// Resolves a pooling mode to the `k` used by [`global_kmax_pool`].
pub fn pool_mode(mode: PoolMode, k: Option<usize>, spatial: usize) -> Result<usize> {
    match mode {
        PoolMode::Gap => Ok(spatial * spatial),
        PoolMode::Gmp => Ok(1),
        PoolMode::Kmax => k.ok_or_else(|| Error::config("pool mode kmax requires k")),
    }
}

/// Positions of the `k` largest entries of `column`, ties going to the lower index.
pub(crate) fn top_k_positions(column: &[f64], k: usize) -> Vec<usize> {
    let order = |a: &usize, b: &usize| {
        column[*b]
            .partial_cmp(&column[*a])
            .expect("finite activations")
            .then(a.cmp(b))
    };
    let mut idx: Vec<usize> = (0..column.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, order);
        idx.truncate(k);
    }
    idx.sort_unstable_by(order);
    idx
}

/// Mean of the top-`k` spatial activations per channel; output is `1×E`.
///
/// The pullback sends `g[ε]/k` to each selected position of channel `ε`.
pub fn global_kmax_pool(fm: &FeatureMap, k: usize) -> Result<GradPair> {
    let positions = fm.positions();
    if k == 0 || k > positions {
        return Err(Error::param(format!(
            "k = {k} outside 1..={positions} for a {m}x{m} map",
            m = fm.spatial
        )));
    }
    let channels = fm.channels();
    let mut value = Matrix::zeros(1, channels);
    let mut selected = Vec::with_capacity(channels);
    let mut column = vec![0.0; positions];
    for c in 0..channels {
        for (p, slot) in column.iter_mut().enumerate() {
            *slot = fm.data[(p, c)];
        }
        // summed largest-first, which makes the result independent of position order
        let top = top_k_positions(&column, k);
        value[(0, c)] = top.iter().map(|&p| column[p]).sum::<f64>() / k as f64;
        selected.push(top);
    }
    let inv_k = 1.0 / k as f64;
    Ok(GradPair::new(value, move |g| {
        let mut out = Matrix::zeros(positions, channels);
        for (c, top) in selected.iter().enumerate() {
            for &p in top {
                out[(p, c)] = g[(0, c)] * inv_k;
            }
        }
        out
    }))
}
