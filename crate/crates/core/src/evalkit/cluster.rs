use std::collections::BTreeMap;

use super::sqdist;
use crate::error::{Error, Result};
use crate::numgrad::Matrix;
use crate::rng::{SeededRng, Stream};

#[derive(Debug, Clone)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after each assignment step, starting with the seeding.
    pub inertia_history: Vec<f64>,
}

/// Nearest centroid per point (ties to the lower centroid index) and the
/// total squared distance.
fn assign(points: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    points
        .iter_rows()
        .map(|p| {
            centroids
                .iter_rows()
                .map(|c| sqdist(p, c))
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best })
        })
        .unzip()
}

fn seed_plus_plus(points: &Matrix, k: usize, rng: &mut SeededRng) -> Matrix {
    let n = points.rows();
    let mut chosen = vec![rng.below(n)];
    let mut nearest: Vec<f64> = points.iter_rows().map(|p| sqdist(p, points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining points coincide with a centroid
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter_rows().enumerate() {
            nearest[i] = nearest[i].min(sqdist(p, points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

/// Lloyd iterations from k-means++ seeding, until the assignment stops
/// changing or `max_iter` updates have run.
///
/// A cluster that loses all its points is re-seeded at the point farthest
/// from its currently assigned centroid.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::param(format!("k = {k} with {n} points")));
    }
    let mut rng = SeededRng::for_stream(seed, Stream::Cluster);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let (mut assignments, mut dists) = assign(points, &centroids);
    let mut history = vec![dists.iter().sum::<f64>()];
    for _ in 0..max_iter {
        let dim = points.cols();
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter_rows().zip(&assignments) {
            counts[c] += 1;
            sums.row_mut(c).iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut taken = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                let mean: Vec<f64> = sums.row(c).iter().map(|s| s * inv).collect();
                centroids.row_mut(c).copy_from_slice(&mean);
            } else {
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a point to re-seed from");
                taken.push(far);
                let row = points.row(far).to_vec();
                centroids.row_mut(c).copy_from_slice(&row);
            }
        }
        let (next, next_d) = assign(points, &centroids);
        history.push(next_d.iter().sum());
        dists = next_d;
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(Clustering {
        inertia: dists.iter().sum(),
        assignments,
        centroids,
        inertia_history: history,
    })
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `2·I(Ω, C) / (H(Ω) + H(C))` with natural logs; 0 when both entropies vanish.
pub fn nmi<A: Ord + Copy, B: Ord + Copy>(truth: &[A], clusters: &[B]) -> Result<f64> {
    if truth.len() != clusters.len() {
        return Err(Error::Shape {
            op: "nmi",
            left: (truth.len(), 1),
            right: (clusters.len(), 1),
        });
    }
    if truth.is_empty() {
        return Err(Error::param("nmi of an empty labelling"));
    }
    let n = truth.len() as f64;
    let mut joint: BTreeMap<(A, B), usize> = BTreeMap::new();
    let mut left: BTreeMap<A, usize> = BTreeMap::new();
    let mut right: BTreeMap<B, usize> = BTreeMap::new();
    for (&a, &b) in truth.iter().zip(clusters) {
        *joint.entry((a, b)).or_default() += 1;
        *left.entry(a).or_default() += 1;
        *right.entry(b).or_default() += 1;
    }
    let h_left = entropy(left.values().copied(), n);
    let h_right = entropy(right.values().copied(), n);
    if h_left + h_right == 0.0 {
        return Ok(0.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let pab = c as f64 / n;
            // p(a,b) / (p(a) p(b)) = c·n / (n_a·n_b)
            pab * (c as f64 * n / (left[&a] as f64 * right[&b] as f64)).ln()
        })
        .sum();
    Ok((2.0 * mi / (h_left + h_right)).clamp(0.0, 1.0))
}
