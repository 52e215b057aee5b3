//! Seeded k-means: k-means++ initialisation followed by Lloyd iterations that
//! stop at an assignment fixpoint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::MetricError;
use crate::io::EmbeddingMatrix;

pub const DEFAULT_MAX_ITERS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: EmbeddingMatrix,
    pub iterations: usize,
    pub converged: bool,
    centers: Vec<f64>,
    dim: usize,
}

#[inline]
fn sq_dist_to_center(x: &[f32], c: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let cx = x.chunks_exact(4);
    let cc = c.chunks_exact(4);
    let (rx, rc) = (cx.remainder(), cc.remainder());
    for (a, b) in cx.zip(cc) {
        for l in 0..4 {
            let d = a[l] as f64 - b[l];
            acc[l] += d * d;
        }
    }
    let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (a, b) in rx.iter().zip(rc) {
        let d = *a as f64 - b;
        s += d * d;
    }
    s
}

impl KMeans {
    pub fn k(&self) -> usize {
        self.centers.len() / self.dim
    }

    fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    /// Index of the closest centroid, ties to the lower index.
    pub fn nearest(&self, x: &[f32]) -> usize {
        nearest_center(x, &self.centers, self.dim).0
    }

    /// Sum of squared distances from each point to its assigned centroid.
    pub fn inertia(&self, points: &EmbeddingMatrix) -> f64 {
        points
            .rows()
            .zip(&self.assignments)
            .map(|(x, &c)| sq_dist_to_center(x, self.center(c)))
            .sum()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn nearest_center(x: &[f32], centers: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist_to_center(x, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &EmbeddingMatrix, centers: &[f64], dim: usize) -> Vec<(usize, f64)> {
    (0..points.len())
        .into_par_iter()
        .map(|i| nearest_center(points.row(i), centers, dim))
        .collect()
}

fn plus_plus_init(points: &EmbeddingMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len();
    let dim = points.dim();
    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;
    let to_f64 = |i: usize| points.row(i).iter().map(|&v| v as f64).collect::<Vec<_>>();
    let mut d2: Vec<f64> = {
        let c = to_f64(first);
        (0..n).into_par_iter().map(|i| sq_dist_to_center(points.row(i), &c)).collect()
    };
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                cum += w;
                if cum > target {
                    pick = Some(i);
                    break;
                }
            }
            // float round-off can leave target just above the final cumulative sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // fewer distinct points than k
            (0..n).find(|&i| !is_chosen[i]).unwrap()
        };
        chosen.push(next);
        is_chosen[next] = true;
        let c = to_f64(next);
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            let nd = sq_dist_to_center(points.row(i), &c);
            if nd < *d {
                *d = nd;
            }
        });
    }
    let mut centers = Vec::with_capacity(k * dim);
    for &i in &chosen {
        centers.extend(points.row(i).iter().map(|&v| v as f64));
    }
    centers
}

/// Recomputes centroids as shifted means (`x0 + mean(x - x0)`, exact for identical members).
/// Empty clusters take the point farthest from its own centroid.
fn update_centers(
    points: &EmbeddingMatrix,
    assignments: &mut [usize],
    k: usize,
) -> Vec<f64> {
    let dim = points.dim();
    let mut anchor: Vec<Option<usize>> = vec![None; k];
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        let a = *anchor[c].get_or_insert(i);
        let x = points.row(i);
        let x0 = points.row(a);
        let s = &mut sums[c * dim..(c + 1) * dim];
        for d in 0..dim {
            s[d] += x[d] as f64 - x0[d] as f64;
        }
        counts[c] += 1;
    }
    let mut centers = vec![0.0f64; k * dim];
    for c in 0..k {
        if let Some(a) = anchor[c] {
            let x0 = points.row(a);
            for d in 0..dim {
                centers[c * dim + d] = x0[d] as f64 + sums[c * dim + d] / counts[c] as f64;
            }
        }
    }
    if counts.contains(&0) {
        let mut dist: Vec<f64> = assignments
            .iter()
            .enumerate()
            .map(|(i, &c)| sq_dist_to_center(points.row(i), &centers[c * dim..(c + 1) * dim]))
            .collect();
        for c in 0..k {
            if counts[c] != 0 {
                continue;
            }
            let mut far: Option<usize> = None;
            for i in 0..assignments.len() {
                if counts[assignments[i]] <= 1 {
                    continue;
                }
                if far.is_none_or(|f| dist[i] > dist[f]) {
                    far = Some(i);
                }
            }
            let Some(p) = far else { break };
            counts[assignments[p]] -= 1;
            assignments[p] = c;
            counts[c] = 1;
            dist[p] = 0.0;
            for d in 0..dim {
                centers[c * dim + d] = points.row(p)[d] as f64;
            }
        }
    }
    centers
}

pub fn kmeans(
    points: &EmbeddingMatrix,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeans, MetricError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(MetricError::InvalidK { k, n });
    }
    if max_iters == 0 {
        return Err(MetricError::InvalidConfig("max_iters must be positive".into()));
    }
    let dim = points.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(points, k, &mut rng);
    let mut assignments: Vec<usize> = assign(points, &centers, dim).into_iter().map(|a| a.0).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let updated = update_centers(points, &mut assignments, k);
        if updated == centers {
            // re-seeded empty clusters can otherwise oscillate among coincident points
            converged = true;
            break;
        }
        centers = updated;
        let next: Vec<usize> = assign(points, &centers, dim).into_iter().map(|a| a.0).collect();
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    if !converged {
        centers = update_centers(points, &mut assignments, k);
    }
    let centroids = EmbeddingMatrix::new(dim, centers.iter().map(|&v| v as f32).collect())
        .expect("centroids of finite points are finite");
    Ok(KMeans {
        assignments,
        centroids,
        iterations,
        converged,
        centers,
        dim,
    })
}
