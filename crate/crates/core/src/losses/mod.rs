//! NCA, ProxyNCA, ProxyNCA++ and NormSoftMax losses.
//!
//! All losses are averaged over the batch. Proxy losses normalize both the
//! embeddings and the stored proxies internally; the normalization of the
//! proxies is what shrinks their gradients, so it is applied on every call.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embedder::ProxyBank;
use crate::error::{Error, Result};
use crate::numgrad::{self, logsumexp, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "nca")]
    Nca,
    #[serde(rename = "proxynca")]
    ProxyNca,
    #[serde(rename = "proxynca_pp")]
    ProxyNcaPp,
    #[serde(rename = "normsoftmax")]
    NormSoftmax,
}

impl LossKind {
    pub fn uses_proxies(self) -> bool {
        !matches!(self, LossKind::Nca)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Nca => "nca",
            LossKind::ProxyNca => "proxynca",
            LossKind::ProxyNcaPp => "proxynca_pp",
            LossKind::NormSoftmax => "normsoftmax",
        }
    }
}

/// Whether stored proxies are projected to the unit sphere inside the loss.
///
/// `Raw` exists only for the gradient-ratio diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyNorm {
    Normalized,
    Raw,
}

#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub grad_embeddings: Matrix,
    /// `None` for losses without proxies.
    pub grad_proxies: Option<Matrix>,
}

/// Class id per batch row, resolved to proxy rows when a bank is given.
#[derive(Debug, Clone)]
pub struct BatchLabels {
    labels: Vec<u32>,
    class_index: BTreeMap<u32, usize>,
}

impl BatchLabels {
    /// Resolves every label against `bank`.
    pub fn new(labels: &[u32], bank: &ProxyBank) -> Result<Self> {
        let class_index: BTreeMap<u32, usize> = bank
            .class_ids
            .iter()
            .enumerate()
            .map(|(row, &c)| (c, row))
            .collect();
        if let Some(missing) = labels.iter().find(|l| !class_index.contains_key(l)) {
            return Err(Error::Labeling(format!("label {missing} has no proxy")));
        }
        Ok(Self {
            labels: labels.to_vec(),
            class_index,
        })
    }

    /// Labels for losses that do not use proxies.
    pub fn unresolved(labels: &[u32]) -> Self {
        Self {
            labels: labels.to_vec(),
            class_index: BTreeMap::new(),
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn proxy_rows(&self, bank: &ProxyBank) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|l| {
                self.class_index
                    .get(l)
                    .copied()
                    .filter(|&r| bank.class_ids.get(r) == Some(l))
                    .ok_or_else(|| Error::Labeling(format!("label {l} has no proxy")))
            })
            .collect()
    }
}

fn check_rows(embeddings: &Matrix, labels: &BatchLabels) -> Result<()> {
    if embeddings.rows() != labels.len() || embeddings.rows() == 0 {
        return Err(Error::Shape {
            op: "loss",
            left: embeddings.shape(),
            right: (labels.len(), 1),
        });
    }
    Ok(())
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("temperature must be positive, got {t}")))
    }
}

type LogitPullback = Box<dyn Fn(&Matrix) -> (Matrix, Matrix) + Send + Sync>;

#[derive(Clone, Copy)]
enum Similarity {
    /// `−‖x̂ − p̂‖²`
    NegSqDist,
    /// `x̂ᵀp̂`
    Cosine,
}

/// `B×K` logits between normalized embeddings and (optionally normalized)
/// proxies, plus a pullback to `(∂embeddings, ∂proxies)`.
fn proxy_logits(
    embeddings: &Matrix,
    proxies: &Matrix,
    sim: Similarity,
    norm: ProxyNorm,
) -> Result<(Matrix, LogitPullback)> {
    let (xhat, x_pb) = numgrad::l2_normalize(embeddings)?.into_parts();
    let (phat, p_pb): (Matrix, Option<Box<dyn Fn(&Matrix) -> Matrix + Send + Sync>>) = match norm {
        ProxyNorm::Normalized => {
            let (v, pb) = numgrad::l2_normalize(proxies)?.into_parts();
            (v, Some(pb))
        }
        ProxyNorm::Raw => (proxies.clone(), None),
    };
    let (logits, inner): (Matrix, LogitPullback) = match sim {
        Similarity::NegSqDist => {
            let (d, pb) = numgrad::pairwise_sqdist(&xhat, &phat)?.into_parts();
            (d.scale(-1.0), Box::new(move |g: &Matrix| pb(&g.scale(-1.0))))
        }
        Similarity::Cosine => {
            numgrad::count_pair_evaluations((xhat.rows() * phat.rows()) as u64);
            let (s, pb) = numgrad::matmul(&xhat, &phat.transpose())?.into_parts();
            (
                s,
                Box::new(move |g: &Matrix| {
                    let (gx, gpt) = pb(g);
                    (gx, gpt.transpose())
                }),
            )
        }
    };
    let pullback: LogitPullback = Box::new(move |g| {
        let (gx, gp) = inner(g);
        let gp = match &p_pb {
            Some(pb) => pb(&gp),
            None => gp,
        };
        (x_pb(&gx), gp)
    });
    Ok((logits, pullback))
}

/// Mean of `−log softmax(logits/T)[own]` over the batch.
fn softmax_nll(
    embeddings: &Matrix,
    labels: &BatchLabels,
    bank: &ProxyBank,
    temperature: f64,
    sim: Similarity,
    norm: ProxyNorm,
) -> Result<LossValue> {
    check_rows(embeddings, labels)?;
    check_temperature(temperature)?;
    check_proxy_dims(embeddings, bank)?;
    let rows = labels.proxy_rows(bank)?;
    let (logits, logit_pb) = proxy_logits(embeddings, &bank.proxies, sim, norm)?;
    let lsm = numgrad::log_softmax_rows(&logits, temperature)?;
    let b = rows.len() as f64;
    let value = -rows
        .iter()
        .enumerate()
        .map(|(i, &y)| lsm.value[(i, y)])
        .sum::<f64>()
        / b;
    let mut g = Matrix::zeros(lsm.value.rows(), lsm.value.cols());
    for (i, &y) in rows.iter().enumerate() {
        g[(i, y)] = -1.0 / b;
    }
    let (ge, gp) = logit_pb(&lsm.pullback(&g));
    Ok(LossValue {
        value,
        grad_embeddings: ge,
        grad_proxies: Some(gp),
    })
}

fn check_proxy_dims(embeddings: &Matrix, bank: &ProxyBank) -> Result<()> {
    if embeddings.cols() != bank.proxies.cols() {
        return Err(Error::Shape {
            op: "loss",
            left: embeddings.shape(),
            right: bank.proxies.shape(),
        });
    }
    Ok(())
}

/// NCA over in-batch pairs.
///
/// Per anchor `i`: `−log(Σ_{j∈C_i, j≠i} exp(−d_ij) / Σ_{k∉C_i} exp(−d_ik))`.
/// The numerator runs over positives and the denominator over negatives only,
/// so the ratio is not a probability and the loss can be negative.
pub fn nca_batch_loss(embeddings: &Matrix, labels: &BatchLabels) -> Result<LossValue> {
    check_rows(embeddings, labels)?;
    let n = embeddings.rows();
    let lab = labels.labels();
    let dist = numgrad::pairwise_sqdist(embeddings, embeddings)?;
    let d = &dist.value;
    let mut gd = Matrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        let pos: Vec<usize> = (0..n).filter(|&j| j != i && lab[j] == lab[i]).collect();
        let neg: Vec<usize> = (0..n).filter(|&j| lab[j] != lab[i]).collect();
        if pos.is_empty() {
            return Err(Error::DegenerateBatch { anchor: i, missing: "positive" });
        }
        if neg.is_empty() {
            return Err(Error::DegenerateBatch { anchor: i, missing: "negative" });
        }
        let lse_pos = logsumexp(pos.iter().map(|&j| -d[(i, j)]));
        let lse_neg = logsumexp(neg.iter().map(|&k| -d[(i, k)]));
        total += lse_neg - lse_pos;
        for &j in &pos {
            gd[(i, j)] += (-d[(i, j)] - lse_pos).exp() / n as f64;
        }
        for &k in &neg {
            gd[(i, k)] -= (-d[(i, k)] - lse_neg).exp() / n as f64;
        }
    }
    let (ga, gb) = dist.pullback(&gd);
    Ok(LossValue {
        value: total / n as f64,
        grad_embeddings: ga.add(&gb),
        grad_proxies: None,
    })
}

/// ProxyNCA: own proxy in the numerator, the OTHER classes' proxies in the
/// denominator, with logits `−d(x̂, p̂)/T`.
pub fn proxynca_loss(
    embeddings: &Matrix,
    labels: &BatchLabels,
    bank: &ProxyBank,
    temperature: f64,
) -> Result<LossValue> {
    proxynca_loss_with(embeddings, labels, bank, temperature, ProxyNorm::Normalized)
}

fn proxynca_loss_with(
    embeddings: &Matrix,
    labels: &BatchLabels,
    bank: &ProxyBank,
    temperature: f64,
    norm: ProxyNorm,
) -> Result<LossValue> {
    check_rows(embeddings, labels)?;
    check_temperature(temperature)?;
    check_proxy_dims(embeddings, bank)?;
    if bank.num_classes() < 2 {
        return Err(Error::config("ProxyNCA needs at least 2 classes in the proxy bank"));
    }
    let rows = labels.proxy_rows(bank)?;
    let (logits, logit_pb) = proxy_logits(embeddings, &bank.proxies, Similarity::NegSqDist, norm)?;
    let b = rows.len() as f64;
    let k = logits.cols();
    let mut g = Matrix::zeros(logits.rows(), k);
    let mut total = 0.0;
    for (i, &y) in rows.iter().enumerate() {
        let scaled: Vec<f64> = logits.row(i).iter().map(|v| v / temperature).collect();
        let others = scaled.iter().enumerate().filter(|&(z, _)| z != y).map(|(_, &v)| v);
        let lse = logsumexp(others);
        total += lse - scaled[y];
        for z in 0..k {
            g[(i, z)] = if z == y {
                -1.0 / (temperature * b)
            } else {
                (scaled[z] - lse).exp() / (temperature * b)
            };
        }
    }
    let (ge, gp) = logit_pb(&g);
    Ok(LossValue {
        value: total / b,
        grad_embeddings: ge,
        grad_proxies: Some(gp),
    })
}

/// Softmax over ALL proxies of `−d(x̂, p̂)/T`; one row per sample.
pub fn proxy_assignment_prob(
    embeddings: &Matrix,
    labels: &BatchLabels,
    bank: &ProxyBank,
    temperature: f64,
) -> Result<Matrix> {
    check_rows(embeddings, labels)?;
    check_temperature(temperature)?;
    check_proxy_dims(embeddings, bank)?;
    let (logits, _) = proxy_logits(
        embeddings,
        &bank.proxies,
        Similarity::NegSqDist,
        ProxyNorm::Normalized,
    )?;
    Ok(numgrad::log_softmax_rows(&logits, temperature)?.value.map(f64::exp))
}

/// ProxyNCA++: `−log P_i` with the own proxy included in the denominator.
pub fn proxynca_pp_loss(
    embeddings: &Matrix,
    labels: &BatchLabels,
    bank: &ProxyBank,
    temperature: f64,
) -> Result<LossValue> {
    softmax_nll(
        embeddings,
        labels,
        bank,
        temperature,
        Similarity::NegSqDist,
        ProxyNorm::Normalized,
    )
}

/// NormSoftMax: as ProxyNCA++ but with cosine-similarity logits `x̂ᵀp̂/T`.
pub fn normsoftmax_loss(
    embeddings: &Matrix,
    labels: &BatchLabels,
    bank: &ProxyBank,
    temperature: f64,
) -> Result<LossValue> {
    softmax_nll(
        embeddings,
        labels,
        bank,
        temperature,
        Similarity::Cosine,
        ProxyNorm::Normalized,
    )
}

/// Dispatches on `kind`. `bank` is ignored by NCA.
pub fn evaluate_loss(
    kind: LossKind,
    embeddings: &Matrix,
    labels: &BatchLabels,
    bank: &ProxyBank,
    temperature: f64,
    norm: ProxyNorm,
) -> Result<LossValue> {
    match kind {
        LossKind::Nca => nca_batch_loss(embeddings, labels),
        LossKind::ProxyNca => proxynca_loss_with(embeddings, labels, bank, temperature, norm),
        LossKind::ProxyNcaPp => softmax_nll(
            embeddings,
            labels,
            bank,
            temperature,
            Similarity::NegSqDist,
            norm,
        ),
        LossKind::NormSoftmax => {
            softmax_nll(embeddings, labels, bank, temperature, Similarity::Cosine, norm)
        }
    }
}

#[cfg(test)]
mod tests;
