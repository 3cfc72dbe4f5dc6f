//! Zero-shot retrieval evaluation: Recall@K, k-means clustering and NMI.

mod cluster;
mod exchange;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use cluster::{kmeans, nmi, Clustering};
pub use exchange::{load_embeddings, save_embeddings, EmbeddingSet};

use crate::error::{Error, Result};
use crate::numgrad::Matrix;

/// k-means seeds averaged for the reported NMI.
pub const NMI_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const KMEANS_MAX_ITER: usize = 300;

/// Where the neighbours of each query come from.
#[derive(Debug, Clone, Copy)]
pub enum Protocol<'a> {
    /// Every point queries all others; the query itself is excluded.
    SameSet,
    /// Separate gallery. With `exclude_same_index`, gallery item `i` is
    /// skipped for query `i` (for galleries that are the query set itself).
    QueryGallery {
        gallery: &'a Matrix,
        gallery_labels: &'a [u32],
        exclude_same_index: bool,
    },
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `depth` nearest gallery indices for every query, nearest first;
/// equal distances go to the lower index.
pub fn neighbor_table(
    queries: &Matrix,
    gallery: &Matrix,
    depth: usize,
    exclude_same_index: bool,
) -> Vec<Vec<usize>> {
    queries
        .iter_rows()
        .enumerate()
        .map(|(q, query)| {
            let mut cands: Vec<(f64, usize)> = gallery
                .iter_rows()
                .enumerate()
                .filter(|&(g, _)| !(exclude_same_index && g == q))
                .map(|(g, row)| (sqdist(query, row), g))
                .collect();
            let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            let depth = depth.min(cands.len());
            if depth > 0 && depth < cands.len() {
                cands.select_nth_unstable_by(depth - 1, order);
                cands.truncate(depth);
            }
            cands.sort_unstable_by(order);
            cands.into_iter().take(depth).map(|(_, g)| g).collect()
        })
        .collect()
}

fn validate_ks(ks: &[usize], available: usize) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::param("no K values given"));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(format!("K values must be strictly ascending: {ks:?}")));
    }
    if ks[0] == 0 {
        return Err(Error::param("K must be >= 1"));
    }
    let max = ks[ks.len() - 1];
    if max > available {
        return Err(Error::param(format!(
            "K = {max} exceeds the {available} candidate neighbours per query"
        )));
    }
    Ok(())
}

/// Recall@K plus the neighbour table it was computed from.
pub fn recall_with_table(
    embeddings: &Matrix,
    labels: &[u32],
    ks: &[usize],
    protocol: Protocol<'_>,
) -> Result<(BTreeMap<usize, f64>, Vec<Vec<usize>>)> {
    if embeddings.rows() != labels.len() {
        return Err(Error::Shape {
            op: "recall_at_k",
            left: embeddings.shape(),
            right: (labels.len(), 1),
        });
    }
    let (gallery, gallery_labels, exclude) = match protocol {
        Protocol::SameSet => {
            if embeddings.rows() < 2 {
                return Err(Error::param("same-set recall needs at least 2 points"));
            }
            (embeddings, labels, true)
        }
        Protocol::QueryGallery {
            gallery,
            gallery_labels,
            exclude_same_index,
        } => {
            if gallery.rows() != gallery_labels.len() || gallery.cols() != embeddings.cols() {
                return Err(Error::Shape {
                    op: "recall_at_k",
                    left: embeddings.shape(),
                    right: gallery.shape(),
                });
            }
            (gallery, gallery_labels, exclude_same_index)
        }
    };
    let available = if exclude && gallery.rows() > 0 {
        gallery.rows() - 1
    } else {
        gallery.rows()
    };
    validate_ks(ks, available)?;
    let depth = ks[ks.len() - 1];
    let table = neighbor_table(embeddings, gallery, depth, exclude);
    let n = labels.len() as f64;
    let recall = ks
        .iter()
        .map(|&k| {
            let hits = table
                .iter()
                .zip(labels)
                .filter(|(nbrs, &l)| nbrs.iter().take(k).any(|&g| gallery_labels[g] == l))
                .count();
            (k, hits as f64 / n)
        })
        .collect();
    Ok((recall, table))
}

/// Fraction of queries with a same-class item among their K nearest neighbours.
pub fn recall_at_k(
    embeddings: &Matrix,
    labels: &[u32],
    ks: &[usize],
    protocol: Protocol<'_>,
) -> Result<BTreeMap<usize, f64>> {
    recall_with_table(embeddings, labels, ks, protocol).map(|(r, _)| r)
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrievalResult {
    pub recall_at: BTreeMap<usize, f64>,
    /// Mean NMI over [`NMI_SEEDS`].
    pub nmi: f64,
    pub nmi_per_seed: Vec<f64>,
    pub neighbor_table: Vec<Vec<usize>>,
}

/// Recall@K under `protocol` and NMI of k-means (k = number of distinct
/// classes) averaged over the given seeds. For query/gallery evaluation the
/// clustering runs on queries and gallery together.
pub fn evaluate(
    embeddings: &Matrix,
    labels: &[u32],
    ks: &[usize],
    protocol: Protocol<'_>,
    nmi_seeds: &[u64],
) -> Result<RetrievalResult> {
    let (recall_at, neighbor_table) = recall_with_table(embeddings, labels, ks, protocol)?;
    let (points, truth) = match protocol {
        Protocol::SameSet => (embeddings.clone(), labels.to_vec()),
        Protocol::QueryGallery {
            gallery,
            gallery_labels,
            ..
        } => (
            Matrix::vstack(&[embeddings.clone(), gallery.clone()])?,
            labels.iter().chain(gallery_labels).copied().collect(),
        ),
    };
    let classes = truth.iter().collect::<BTreeSet<_>>().len();
    let nmi_per_seed = nmi_seeds
        .iter()
        .map(|&seed| {
            let c = kmeans(&points, classes, seed, KMEANS_MAX_ITER)?;
            nmi(&truth, &c.assignments)
        })
        .collect::<Result<Vec<f64>>>()?;
    let nmi = if nmi_per_seed.is_empty() {
        f64::NAN
    } else {
        nmi_per_seed.iter().sum::<f64>() / nmi_per_seed.len() as f64
    };
    Ok(RetrievalResult {
        recall_at,
        nmi,
        nmi_per_seed,
        neighbor_table,
    })
}

/// Recall@1 on a same-set evaluation; the validation metric during training.
pub fn recall_at_1(embeddings: &Matrix, labels: &[u32]) -> Result<f64> {
    Ok(recall_at_k(embeddings, labels, &[1], Protocol::SameSet)?[&1])
}
