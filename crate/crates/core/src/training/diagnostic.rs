use serde::Serialize;

use crate::embedder::embed_pooled;
use crate::error::Result;
use crate::losses::{evaluate_loss, BatchLabels, LossKind, ProxyNorm};
use crate::numgrad::Matrix;

use super::fit::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradRatioReport {
    pub loss: f64,
    pub proxy_grad_norm: f64,
    pub weight_grad_norm: f64,
    pub bias_grad_norm: f64,
    /// `‖∂L/∂proxies‖ / ‖∂L/∂W‖`; `None` when both norms are zero.
    pub ratio: Option<f64>,
}

/// Gradient norms of one batch of pooled features under `loss`.
pub fn grad_ratio_diagnostic(
    model: &Model,
    pooled: &Matrix,
    labels: &[u32],
    loss: LossKind,
    temperature: f64,
    norm: ProxyNorm,
) -> Result<GradRatioReport> {
    let resolved = if loss.uses_proxies() {
        BatchLabels::new(labels, &model.bank)?
    } else {
        BatchLabels::unresolved(labels)
    };
    let emb = embed_pooled(pooled, &model.embedder)?;
    let value = evaluate_loss(loss, &emb.value, &resolved, &model.bank, temperature, norm)?;
    let head = emb.pullback(&value.grad_embeddings);
    let proxy_grad_norm = value.grad_proxies.as_ref().map_or(0.0, Matrix::frobenius_norm);
    let weight_grad_norm = head.weights.frobenius_norm();
    let ratio = if proxy_grad_norm == 0.0 && weight_grad_norm == 0.0 {
        None
    } else {
        Some(proxy_grad_norm / weight_grad_norm)
    };
    Ok(GradRatioReport {
        loss: value.value,
        proxy_grad_norm,
        weight_grad_norm,
        bias_grad_norm: head.bias.frobenius_norm(),
        ratio,
    })
}
