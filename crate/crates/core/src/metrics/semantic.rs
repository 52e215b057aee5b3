use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{kmeans, MetricConfig, MetricError};
use crate::geometry::{knn_prepared, DistanceKind, Prepared, SelfMatch};
use crate::io::EmbeddingMatrix;
use crate::report::MetricReport;

/// Eigenvalues of the trace-normalised kernel in `[-tol, 0)` are clipped to zero;
/// anything more negative is reported as an error.
pub const VENDI_NEGATIVE_TOLERANCE: f64 = 1e-8;
/// Cholesky pivots at or below this value mark the similarity matrix as singular.
pub const LDD_PIVOT_TOLERANCE: f64 = 1e-10;
pub const RADIUS_STD_FLOOR: f64 = 1e-12;

fn require(n: usize, needed: usize) -> Result<(), MetricError> {
    if n < needed {
        Err(MetricError::TooFewSamples { needed, got: n })
    } else {
        Ok(())
    }
}

/// Mean distance over the `n(n-1)/2` unordered pairs; `raw_sum` carries the
/// ordered-pair sum over `i != j`.
pub fn dist_sum(emb: &EmbeddingMatrix, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    require(emb.len(), 2)?;
    let p = Prepared::new(emb, config.distance)?;
    let n = emb.len();
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| p.distance(i, &p, j)).sum())
        .collect();
    let upper: f64 = row_sums.iter().sum();
    let pairs = (n * (n - 1) / 2) as f64;
    let name = match config.distance {
        DistanceKind::Cosine => "distsum_cosine",
        DistanceKind::SquaredL2 => "distsum_l2",
        DistanceKind::Euclidean => "distsum_euclidean",
    };
    Ok(MetricReport::new(name, upper / pairs, config, n)
        .with_raw_sum(2.0 * upper)
        .with_note("mean over n(n-1)/2 pairs; raw_sum is the sum over ordered pairs i != j"))
}

/// Mean distance from each sample to its `knn_k`-th nearest neighbour (self excluded).
pub fn knn_distance(emb: &EmbeddingMatrix, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    config.validate()?;
    require(emb.len(), config.knn_k + 1)?;
    let p = Prepared::new(emb, config.distance)?;
    let lists = knn_prepared(&p, &p, config.knn_k, SelfMatch::SameIndex)?;
    let total: f64 = lists
        .iter()
        .map(|l| l.kth(config.knn_k).unwrap().distance)
        .sum();
    Ok(MetricReport::new("knn_distance", total / emb.len() as f64, config, emb.len()))
}

pub fn cluster_inertia(emb: &EmbeddingMatrix, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    config.validate()?;
    if emb.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    let k = config.inertia_clusters.min(emb.len());
    let km = kmeans(emb, k, config.seed, config.kmeans_max_iters)?;
    let mut report = MetricReport::new("cluster_inertia", km.inertia(emb), config, emb.len());
    if k < config.inertia_clusters {
        report = report.with_note(format!(
            "clusters reduced from {} to dataset size {k}",
            config.inertia_clusters
        ));
    }
    if !km.converged {
        report = report.with_note(format!("k-means stopped at max_iters={}", config.kmeans_max_iters));
    }
    Ok(report)
}

/// Rényi effective rank `(sum lambda^alpha)^(1/(1-alpha))` of normalised eigenvalues.
/// Expects eigenvalues of a PSD kernel; applies the clipping rules.
pub fn vendi_from_eigenvalues(eigenvalues: &[f64], alpha: f64, size_hint: usize) -> Result<f64, MetricError> {
    let max = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(MetricError::EigenFailure("kernel has no positive eigenvalue".into()));
    }
    if let Some(&neg) = eigenvalues.iter().find(|&&l| l < -VENDI_NEGATIVE_TOLERANCE) {
        return Err(MetricError::NegativeEigenvalue(neg));
    }
    // round-off noise of a rank-deficient kernel would otherwise inflate the score
    let noise = size_hint as f64 * f64::EPSILON * max;
    let kept: Vec<f64> = eigenvalues.iter().map(|&l| if l <= noise { 0.0 } else { l }).collect();
    let total: f64 = kept.iter().sum();
    let mass: f64 = kept.iter().filter(|&&l| l > 0.0).map(|&l| (l / total).powf(alpha)).sum();
    Ok((mass.ln() / (1.0 - alpha)).exp())
}

pub fn vendi_score(emb: &EmbeddingMatrix, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    config.validate()?;
    if emb.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    let n = emb.len();
    let h = emb.dim();
    let p = Prepared::new(emb, DistanceKind::Cosine)?;
    // nonzero spectrum of K/n equals that of the H x H Gram of unit rows
    let kernel = if n <= h {
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = 1.0 / n as f64;
            for j in (i + 1)..n {
                let s = p.similarity(i, &p, j) / n as f64;
                k[(i, j)] = s;
                k[(j, i)] = s;
            }
        }
        k
    } else {
        let mut g = DMatrix::<f64>::zeros(h, h);
        for row in emb.rows() {
            let norm = crate::geometry::dot(row, row).sqrt();
            let unit: Vec<f64> = row.iter().map(|&v| v as f64 / norm).collect();
            for a in 0..h {
                let ua = unit[a];
                for b in a..h {
                    g[(a, b)] += ua * unit[b];
                }
            }
        }
        for a in 0..h {
            for b in a..h {
                let v = g[(a, b)] / n as f64;
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        g
    };
    let eig = kernel
        .try_symmetric_eigen(1e-14, 10_000)
        .ok_or_else(|| MetricError::EigenFailure("symmetric eigensolver did not converge".into()))?;
    let score = vendi_from_eigenvalues(eig.eigenvalues.as_slice(), config.vendi_alpha, n.max(h))?;
    Ok(MetricReport::new("vendi_score", score, config, n)
        .with_note("cosine kernel, natural-log Renyi effective rank"))
}

/// Geometric mean of per-dimension population standard deviations.
pub fn radius(emb: &EmbeddingMatrix, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    require(emb.len(), 2)?;
    let n = emb.len() as f64;
    let h = emb.dim();
    let mut mean = vec![0.0f64; h];
    for row in emb.rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; h];
    for row in emb.rows() {
        for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
            let d = v as f64 - m;
            *s += d * d;
        }
    }
    let mut floored = 0usize;
    let log_sum: f64 = var
        .iter()
        .map(|&s| {
            let sd = (s / n).sqrt();
            if sd < RADIUS_STD_FLOOR {
                floored += 1;
                RADIUS_STD_FLOOR.ln()
            } else {
                sd.ln()
            }
        })
        .sum();
    let mut report = MetricReport::new("radius", (log_sum / h as f64).exp(), config, emb.len());
    if floored > 0 {
        report = report.with_note(format!("{floored} dimensions floored to std {RADIUS_STD_FLOOR:e}"));
    }
    Ok(report)
}

/// Log-determinant of the cosine similarity matrix via Cholesky; `-inf` when singular.
pub fn ldd(emb: &EmbeddingMatrix, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    if emb.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    let n = emb.len();
    let p = Prepared::new(emb, DistanceKind::Cosine)?;
    if n > emb.dim() {
        return Ok(MetricReport::new("ldd", f64::NEG_INFINITY, config, n)
            .with_note("more samples than dimensions: similarity matrix is rank deficient"));
    }
    // row-major lower factor, row i holds i+1 entries
    let mut l: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut logdet = 0.0;
    for i in 0..n {
        let mut row = vec![0.0f64; i + 1];
        for j in 0..i {
            let s = p.similarity(i, &p, j);
            let lj = &l[j];
            let acc: f64 = row[..j].iter().zip(&lj[..j]).map(|(a, b)| a * b).sum();
            row[j] = (s - acc) / lj[j];
        }
        let pivot = 1.0 - row[..i].iter().map(|v| v * v).sum::<f64>();
        if pivot <= LDD_PIVOT_TOLERANCE {
            return Ok(MetricReport::new("ldd", f64::NEG_INFINITY, config, n)
                .with_note(format!("similarity matrix singular to tolerance at row {i}")));
        }
        row[i] = pivot.sqrt();
        logdet += pivot.ln();
        l.push(row);
    }
    Ok(MetricReport::new("ldd", logdet, config, n))
}

/// Sum over the pool of each point's best cosine similarity to the selection.
pub fn facility_location(
    selected: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    config: &MetricConfig,
) -> Result<MetricReport, MetricError> {
    if selected.is_empty() {
        return Err(MetricError::EmptySelection);
    }
    let ps = Prepared::new(selected, DistanceKind::Cosine)?;
    let pp = Prepared::new(pool, DistanceKind::Cosine)?;
    if selected.dim() != pool.dim() {
        return Err(crate::geometry::GeometryError::DimMismatch {
            left: selected.dim(),
            right: pool.dim(),
        }
        .into());
    }
    let best: Vec<f64> = (0..pool.len())
        .into_par_iter()
        .map(|j| {
            (0..selected.len())
                .map(|i| ps.similarity(i, &pp, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(MetricReport::new("facility_location", best.iter().sum(), config, selected.len())
        .with_note("similarity form: sum over pool of max cosine similarity to the selection"))
}

/// Entropy (natural log) of the selection's histogram over a fixed partition.
pub fn partition_entropy_from_assignments(
    assignments: &[usize],
    k: usize,
    selected_indices: &[usize],
) -> Result<f64, MetricError> {
    if selected_indices.is_empty() {
        return Err(MetricError::EmptySelection);
    }
    let mut counts = vec![0usize; k];
    for &i in selected_indices {
        let c = *assignments.get(i).ok_or_else(|| {
            MetricError::InvalidConfig(format!("selected index {i} out of range"))
        })?;
        counts[c] += 1;
    }
    let total = selected_indices.len() as f64;
    Ok(-counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>())
}

fn entropy_clustering(pool: &EmbeddingMatrix, config: &MetricConfig) -> Result<super::KMeans, MetricError> {
    config.validate()?;
    if pool.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    kmeans(pool, config.entropy_clusters, config.seed, config.kmeans_max_iters)
}

/// Partition entropy of pool rows `selected_indices` over a k-means partition of the whole pool.
pub fn partition_entropy(
    selected_indices: &[usize],
    pool: &EmbeddingMatrix,
    config: &MetricConfig,
) -> Result<MetricReport, MetricError> {
    if selected_indices.is_empty() {
        return Err(MetricError::EmptySelection);
    }
    let km = entropy_clustering(pool, config)?;
    let h = partition_entropy_from_assignments(&km.assignments, km.k(), selected_indices)?;
    Ok(MetricReport::new("partition_entropy", h, config, selected_indices.len()))
}

/// Same as [`partition_entropy`] for a selection given as embeddings: each row
/// is placed in the cluster of its nearest centroid.
pub fn partition_entropy_by_nearest(
    selected: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    config: &MetricConfig,
) -> Result<MetricReport, MetricError> {
    if selected.is_empty() {
        return Err(MetricError::EmptySelection);
    }
    if selected.dim() != pool.dim() {
        return Err(crate::geometry::GeometryError::DimMismatch {
            left: selected.dim(),
            right: pool.dim(),
        }
        .into());
    }
    let km = entropy_clustering(pool, config)?;
    let labels: Vec<usize> = selected.rows().map(|r| km.nearest(r)).collect();
    let idx: Vec<usize> = (0..labels.len()).collect();
    let h = partition_entropy_from_assignments(&labels, km.k(), &idx)?;
    Ok(MetricReport::new("partition_entropy", h, config, selected.len())
        .with_note("selection rows assigned to their nearest pool centroid"))
}
