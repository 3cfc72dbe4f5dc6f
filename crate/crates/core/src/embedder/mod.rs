//! The embedding head: pooled backbone features → linear map → optional
//! affine-free layer norm → L2 normalization, and the per-class proxies.

mod checkpoint;
mod toy;

use serde::{Deserialize, Serialize};

pub use checkpoint::Checkpoint;
pub use toy::{toy_forward, ToyBackbone, ToyGrads, TOY_HIDDEN};

use crate::error::{Error, Result};
use crate::hexfloat;
use crate::numgrad::{self, GradPair, Matrix};
use crate::pooling::{global_kmax_pool, FeatureMap};
use crate::rng::{SeededRng, Stream};

pub const DEFAULT_LN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderParams {
    pub pool_k: usize,
    #[serde(with = "hexfloat::matrix")]
    pub embed_weights: Matrix,
    #[serde(with = "hexfloat::matrix")]
    pub embed_bias: Matrix,
    pub use_layer_norm: bool,
    #[serde(with = "hexfloat::scalar")]
    pub ln_epsilon: f64,
}

impl EmbedderParams {
    pub fn channels(&self) -> usize {
        self.embed_weights.rows()
    }

    pub fn emb_dim(&self) -> usize {
        self.embed_weights.cols()
    }

    pub fn with_pool_k(mut self, k: usize) -> Self {
        self.pool_k = k;
        self
    }

    pub fn with_layer_norm(mut self, on: bool) -> Self {
        self.use_layer_norm = on;
        self
    }
}

/// Gradients of a scalar with respect to the head parameters.
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub weights: Matrix,
    pub bias: Matrix,
}

/// One learnable vector per training class, stored unnormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyBank {
    #[serde(with = "hexfloat::matrix")]
    pub proxies: Matrix,
    pub class_ids: Vec<u32>,
}

impl ProxyBank {
    pub fn new(proxies: Matrix, class_ids: Vec<u32>) -> Result<Self> {
        if proxies.rows() != class_ids.len() {
            return Err(Error::param(format!(
                "{} proxy rows for {} classes",
                proxies.rows(),
                class_ids.len()
            )));
        }
        let mut sorted = class_ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != class_ids.len() {
            return Err(Error::param("duplicate class id in proxy bank"));
        }
        Ok(Self { proxies, class_ids })
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn row_of(&self, class: u32) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == class)
    }
}

fn normal_matrix(rows: usize, cols: usize, std: f64, rng: &mut SeededRng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| std * rng.normal())
}

/// Head with weights drawn from `Normal(0, 1/sqrt(E))`, zero bias, max pooling
/// and layer norm enabled.
pub fn init_params(channels: usize, emb_dim: usize, seed: u64) -> Result<EmbedderParams> {
    if channels == 0 || emb_dim == 0 {
        return Err(Error::param("channel count and embedding size must be >= 1"));
    }
    let mut rng = SeededRng::for_stream(seed, Stream::Init);
    Ok(EmbedderParams {
        pool_k: 1,
        embed_weights: normal_matrix(channels, emb_dim, 1.0 / (channels as f64).sqrt(), &mut rng),
        embed_bias: Matrix::zeros(1, emb_dim),
        use_layer_norm: true,
        ln_epsilon: DEFAULT_LN_EPSILON,
    })
}

/// Proxies drawn from `Normal(0, 1/sqrt(emb_dim))`, one per class id.
pub fn init_proxies(class_ids: &[u32], emb_dim: usize, seed: u64) -> Result<ProxyBank> {
    if class_ids.is_empty() || emb_dim == 0 {
        return Err(Error::param("proxy bank needs >= 1 class and emb_dim >= 1"));
    }
    let mut rng = SeededRng::for_stream(seed, Stream::Proxies);
    let proxies = normal_matrix(class_ids.len(), emb_dim, 1.0 / (emb_dim as f64).sqrt(), &mut rng);
    ProxyBank::new(proxies, class_ids.to_vec())
}

/// Pools every feature map into one `B×E` matrix (forward only).
pub fn pool_batch(features: &[&FeatureMap], k: usize) -> Result<Matrix> {
    let first = features
        .first()
        .ok_or_else(|| Error::param("empty batch"))?;
    let (m, e) = (first.spatial(), first.channels());
    let mut pooled = Matrix::zeros(features.len(), e);
    for (i, fm) in features.iter().enumerate() {
        if fm.spatial() != m || fm.channels() != e {
            return Err(Error::Shape {
                op: "embed_batch",
                left: (m * m, e),
                right: fm.data().shape(),
            });
        }
        let v = global_kmax_pool(fm, k)?.value;
        pooled.row_mut(i).copy_from_slice(v.row(0));
    }
    Ok(pooled)
}

/// Embeds a batch; the pullback maps `∂L/∂embeddings` to head gradients.
pub fn embed_batch(features: &[&FeatureMap], params: &EmbedderParams) -> Result<GradPair<HeadGrads>> {
    let pooled = pool_batch(features, params.pool_k)?;
    embed_pooled(&pooled, params)
}

/// Same as [`embed_batch`] starting from already pooled `B×E` features.
pub fn embed_pooled(pooled: &Matrix, params: &EmbedderParams) -> Result<GradPair<HeadGrads>> {
    if pooled.cols() != params.channels() {
        return Err(Error::Shape {
            op: "embed_batch",
            left: pooled.shape(),
            right: params.embed_weights.shape(),
        });
    }
    let (linear, linear_pb) = numgrad::matmul(pooled, &params.embed_weights)?.into_parts();
    let (biased, bias_pb) = numgrad::add_row_bias(&linear, &params.embed_bias)?.into_parts();
    let (pre, ln_pb) = if params.use_layer_norm {
        let (v, pb) = numgrad::layer_norm(&biased, params.ln_epsilon)?.into_parts();
        (v, Some(pb))
    } else {
        (biased, None)
    };
    let (out, norm_pb) = numgrad::l2_normalize(&pre)?.into_parts();
    Ok(GradPair::new(out, move |g| {
        let mut g = norm_pb(g);
        if let Some(pb) = &ln_pb {
            g = pb(&g);
        }
        let (g, bias) = bias_pb(&g);
        let (_, weights) = linear_pb(&g);
        HeadGrads { weights, bias }
    }))
}

/// Forward-only embedding of a whole set, in chunks.
pub fn embed_all(features: &[FeatureMap], params: &EmbedderParams) -> Result<Matrix> {
    let refs: Vec<&FeatureMap> = features.iter().collect();
    let mut parts = Vec::new();
    for chunk in refs.chunks(256) {
        parts.push(embed_batch(chunk, params)?.value);
    }
    Matrix::vstack(&parts)
}

#[cfg(test)]
mod tests;
