//! Test helpers: seeded data and naive reference implementations written
//! independently of the library's kernels (plain f64 loops, full sorts).

#![allow(dead_code)]
// index loops mirror the textbook elimination and Jacobi sweeps
#![allow(clippy::needless_range_loop)]

use novelsum_core::{DistanceKind, EmbeddingMatrix, Normalization, NovelSumConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut r = rng(seed);
    let normal = Normal::new(0.0f32, 1.0).unwrap();
    let data = (0..n * dim).map(|_| normal.sample(&mut r)).collect();
    EmbeddingMatrix::new(dim, data).unwrap()
}

pub fn uniform_matrix(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut r = rng(seed);
    let data = (0..n * dim).map(|_| r.random_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(dim, data).unwrap()
}

pub fn rows_f64(m: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    m.rows().map(|r| r.iter().map(|&v| v as f64).collect()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

pub fn dist(kind: DistanceKind, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        DistanceKind::Cosine => 1.0 - cosine_sim(a, b),
        DistanceKind::SquaredL2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        DistanceKind::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
    }
}

/// `|a - b| <= rel * max(|a|, |b|)`, or `|a - b| <= abs` near zero.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    if a == b {
        return true;
    }
    let diff = (a - b).abs();
    diff <= abs || diff <= rel * a.abs().max(b.abs())
}

#[track_caller]
pub fn assert_close(got: f64, want: f64, rel: f64, abs: f64, what: &str) {
    assert!(close(got, want, rel, abs), "{what}: got {got}, oracle {want}");
}

/// Density factors by brute force: sort all reference distances, drop the
/// first reference row equal to the sample, sum the `k` smallest.
pub fn naive_sigma(samples: &[Vec<f64>], reference: &[Vec<f64>], k: usize, kind: DistanceKind, eps: f64) -> Vec<f64> {
    samples
        .iter()
        .map(|x| {
            let own = reference.iter().position(|r| r == x);
            let mut d: Vec<f64> = reference
                .iter()
                .enumerate()
                .filter(|(j, _)| Some(*j) != own)
                .map(|(_, r)| dist(kind, x, r))
                .collect();
            d.sort_by(f64::total_cmp);
            1.0 / d.iter().take(k).sum::<f64>().max(eps)
        })
        .collect()
}

/// Novelty of every sample from the definition: density-aware distances to all
/// others, ranked ascending (ties by index), weighted by `(1/rank)^alpha`.
pub fn naive_novelties(data: &[Vec<f64>], reference: &[Vec<f64>], c: &NovelSumConfig) -> Vec<f64> {
    let sigma = naive_sigma(data, reference, c.k, c.distance, c.epsilon);
    let n = data.len();
    (0..n)
        .map(|i| {
            let mut row: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sigma[j].powf(c.beta) * dist(c.distance, &data[i], &data[j]), j))
                .collect();
            row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut num = 0.0;
            let mut den = 0.0;
            for (r, (v, _)) in row.iter().enumerate() {
                let w = (1.0 / (r + 1) as f64).powf(c.alpha);
                num += w * v;
                den += w;
            }
            match c.normalization {
                Normalization::RawSum => num,
                Normalization::MeanWeightedNovelty if den > 0.0 => num / den,
                Normalization::MeanWeightedNovelty => 0.0,
            }
        })
        .collect()
}

pub fn naive_novelsum(data: &[Vec<f64>], reference: &[Vec<f64>], c: &NovelSumConfig) -> f64 {
    let v = naive_novelties(data, reference, c);
    match c.normalization {
        Normalization::RawSum => v.iter().sum(),
        Normalization::MeanWeightedNovelty => v.iter().sum::<f64>() / v.len() as f64,
    }
}

/// Novelty of `candidate` against `selected` from scratch.
pub fn naive_novelty_against(
    data: &[Vec<f64>],
    sigma: &[f64],
    selected: &[usize],
    candidate: usize,
    c: &NovelSumConfig,
) -> f64 {
    let mut d: Vec<(f64, usize)> = selected
        .iter()
        .map(|&s| (sigma[s].powf(c.beta) * dist(c.distance, &data[candidate], &data[s]), s))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.iter()
        .enumerate()
        .map(|(r, (v, _))| (1.0 / (r + 1) as f64).powf(c.alpha) * v)
        .sum()
}

/// Textbook two-pass Pearson correlation.
pub fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

/// Average ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
pub fn naive_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let smaller = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn naive_spearman(x: &[f64], y: &[f64]) -> f64 {
    naive_pearson(&naive_ranks(x), &naive_ranks(y))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// `ln |det A|` by Gaussian elimination with partial pivoting; `-inf` if singular.
pub fn log_abs_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        if a[piv][col].abs() < 1e-300 {
            return f64::NEG_INFINITY;
        }
        a.swap(col, piv);
        acc += a[col][col].abs().ln();
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    acc
}
