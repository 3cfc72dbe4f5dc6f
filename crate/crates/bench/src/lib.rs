//! Deterministic inputs shared by the benchmarks.

use proxylab::embedder::ProxyBank;
use proxylab::losses::BatchLabels;
use proxylab::pooling::FeatureMap;
use proxylab::rng::SeededRng;
use proxylab::Matrix;

pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = SeededRng::new(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn feature_map(spatial: usize, channels: usize, seed: u64) -> FeatureMap {
    FeatureMap::new(spatial, normal_matrix(spatial * spatial, channels, seed)).expect("valid map")
}

/// `batch` embeddings of width `dim`, labels cycling over `classes`, one proxy per class.
pub fn proxy_batch(batch: usize, classes: usize, dim: usize, seed: u64) -> (Matrix, BatchLabels, ProxyBank) {
    let labels: Vec<u32> = (0..batch).map(|i| (i % classes) as u32).collect();
    let bank = ProxyBank::new(normal_matrix(classes, dim, seed + 1), (0..classes as u32).collect()).expect("bank");
    let resolved = BatchLabels::new(&labels, &bank).expect("labels");
    (normal_matrix(batch, dim, seed), resolved, bank)
}

/// Embedding set with `classes` labels assigned round-robin.
pub fn labeled_points(n: usize, dim: usize, classes: usize, seed: u64) -> (Matrix, Vec<u32>) {
    (normal_matrix(n, dim, seed), (0..n).map(|i| (i % classes) as u32).collect())
}
