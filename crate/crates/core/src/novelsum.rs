//! NovelSum: per-sample novelty as a proximity-weighted sum of density-aware
//! distances, aggregated over the dataset.
//!
//! Density-aware distance from `i` to `j` is `sigma_j^beta * d(i, j)`, where
//! `sigma_j` is the density factor of the *target* `j` against a reference pool.
//! Ranks are taken on these density-aware distances, so density can reorder a
//! sample's neighbours. The proximity weight of the rank-`r` neighbour is `(1/r)^alpha`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{
    density_profile, DensityProfile, DistanceKind, DistanceMatrix, GeometryError, Prepared,
    DEFAULT_DENSITY_EPSILON,
};
use crate::io::EmbeddingMatrix;
use crate::report::MetricReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NovelSumError {
    #[error("density profile does not match the dataset: {0}")]
    ProfileMismatch(String),
    #[error("matrix is not square ({rows} x {cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Plain sum of proximity-weighted novelties.
    RawSum,
    /// Each novelty divided by its total proximity weight, then averaged over samples.
    MeanWeightedNovelty,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::RawSum => "raw_sum",
            Normalization::MeanWeightedNovelty => "mean_weighted_novelty",
        })
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw_sum" | "raw" => Ok(Normalization::RawSum),
            "mean_weighted_novelty" | "mean" | "mwn" => Ok(Normalization::MeanWeightedNovelty),
            other => Err(format!("unknown normalization {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NovelSumConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub distance: DistanceKind,
    pub epsilon: f64,
    pub normalization: Normalization,
}

impl Default for NovelSumConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            k: 10,
            distance: DistanceKind::Cosine,
            epsilon: DEFAULT_DENSITY_EPSILON,
            normalization: Normalization::MeanWeightedNovelty,
        }
    }
}

impl NovelSumConfig {
    pub fn validate(&self) -> Result<(), NovelSumError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(NovelSumError::InvalidConfig("alpha must be finite and >= 0".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(NovelSumError::InvalidConfig("beta must be finite and >= 0".into()));
        }
        if self.k == 0 {
            return Err(NovelSumError::InvalidConfig("k must be >= 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(NovelSumError::InvalidConfig("epsilon must be positive".into()));
        }
        Ok(())
    }

    /// `(1/r)^alpha` for ranks `1..=max_rank`, at index `r - 1`.
    pub fn proximity_weights(&self, max_rank: usize) -> Vec<f64> {
        (1..=max_rank).map(|r| (1.0 / r as f64).powf(self.alpha)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyBreakdown {
    /// Novelty of each sample under the configured normalization.
    pub per_sample_novelty: Vec<f64>,
    pub rank_matrix_digest: String,
    pub config: NovelSumConfig,
    pub sigma_source: String,
}

impl NoveltyBreakdown {
    pub fn aggregate(&self) -> f64 {
        aggregate(&self.per_sample_novelty, self.config.normalization)
    }
}

fn aggregate(novelty: &[f64], normalization: Normalization) -> f64 {
    let total: f64 = novelty.iter().sum();
    match normalization {
        Normalization::RawSum => total,
        Normalization::MeanWeightedNovelty if novelty.is_empty() => 0.0,
        Normalization::MeanWeightedNovelty => total / novelty.len() as f64,
    }
}

/// Proximity ranks, 1-based, with 0 on the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMatrix {
    n: usize,
    ranks: Vec<u32>,
}

impl RankMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.ranks[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ranks[i * self.n..(i + 1) * self.n]
    }
}

fn check_profile(n: usize, profile: &DensityProfile, config: &NovelSumConfig) -> Result<(), NovelSumError> {
    if profile.len() != n {
        return Err(NovelSumError::ProfileMismatch(format!(
            "{} density factors for {n} samples",
            profile.len()
        )));
    }
    if profile.distance != config.distance {
        return Err(NovelSumError::ProfileMismatch(format!(
            "profile uses {} but config uses {}",
            profile.distance, config.distance
        )));
    }
    Ok(())
}

fn density_weights(profile: &DensityProfile, beta: f64) -> Vec<f64> {
    profile.sigma.iter().map(|s| s.powf(beta)).collect()
}

/// Row `i` of the density-aware distance matrix into `out`.
fn density_aware_row(p: &Prepared<'_>, i: usize, weights: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = if i == j { 0.0 } else { weights[j] * p.distance(i, p, j) };
    }
}

pub fn density_aware_matrix(
    dataset: &EmbeddingMatrix,
    profile: &DensityProfile,
    config: &NovelSumConfig,
) -> Result<DistanceMatrix, NovelSumError> {
    config.validate()?;
    let n = dataset.len();
    check_profile(n, profile, config)?;
    let p = Prepared::new(dataset, config.distance)?;
    let weights = density_weights(profile, config.beta);
    let mut data = vec![0.0; n * n];
    if n > 0 {
        data.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| density_aware_row(&p, i, &weights, row));
    }
    Ok(DistanceMatrix::from_vec(n, n, data))
}

/// Off-diagonal columns of `row` (excluding `skip`) ordered by value, ties by column.
fn order_row(row: &[f64], skip: usize, order: &mut Vec<u32>) {
    order.clear();
    order.extend((0..row.len() as u32).filter(|&j| j as usize != skip));
    order.sort_unstable_by(|&a, &b| {
        row[a as usize]
            .total_cmp(&row[b as usize])
            .then(a.cmp(&b))
    });
}

pub fn proximity_ranks(dam: &DistanceMatrix) -> Result<RankMatrix, NovelSumError> {
    if !dam.is_square() {
        return Err(NovelSumError::NonSquare {
            rows: dam.rows(),
            cols: dam.cols(),
        });
    }
    let n = dam.rows();
    let mut ranks = vec![0u32; n * n];
    if n > 0 {
        ranks.par_chunks_mut(n).enumerate().for_each_init(Vec::new, |order, (i, out)| {
            order_row(dam.row(i), i, order);
            for (r, &j) in order.iter().enumerate() {
                out[j as usize] = r as u32 + 1;
            }
        });
    }
    Ok(RankMatrix { n, ranks })
}

/// Novelty of sample `i` from a precomputed density-aware matrix and its ranks.
pub fn novelty(
    i: usize,
    dam: &DistanceMatrix,
    ranks: &RankMatrix,
    config: &NovelSumConfig,
) -> f64 {
    let n = dam.rows();
    assert!(i < n && ranks.len() == n, "novelty index or rank matrix out of range");
    let mut weighted = 0.0;
    let mut weight_total = 0.0;
    for j in 0..n {
        if j == i {
            continue;
        }
        let w = (1.0 / ranks.get(i, j) as f64).powf(config.alpha);
        weighted += w * dam.get(i, j);
        weight_total += w;
    }
    normalize(weighted, weight_total, config.normalization)
}

#[inline]
fn normalize(weighted: f64, weight_total: f64, normalization: Normalization) -> f64 {
    match normalization {
        Normalization::RawSum => weighted,
        Normalization::MeanWeightedNovelty if weight_total > 0.0 => weighted / weight_total,
        Normalization::MeanWeightedNovelty => 0.0,
    }
}

/// Novelty of every row given per-target density weights, streamed row by row
/// so memory stays O(n) per thread. Returns novelties and per-row order digests.
fn streamed_novelties(
    p: &Prepared<'_>,
    density: &[f64],
    config: &NovelSumConfig,
) -> (Vec<f64>, Vec<[u8; 32]>) {
    let n = p.len();
    let weights = config.proximity_weights(n.saturating_sub(1));
    let weight_total: f64 = weights.iter().sum();
    (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], Vec::<u32>::with_capacity(n)),
            |(row, order), i| {
                density_aware_row(p, i, density, row);
                order_row(row, i, order);
                let weighted: f64 = order
                    .iter()
                    .zip(&weights)
                    .map(|(&j, w)| w * row[j as usize])
                    .sum();
                let mut h = Sha256::new();
                for &j in order.iter() {
                    h.update(j.to_le_bytes());
                }
                let digest: [u8; 32] = h.finalize().into();
                (normalize(weighted, weight_total, config.normalization), digest)
            },
        )
        .unzip()
}

fn digest_rows(rows: &[[u8; 32]]) -> String {
    let mut h = Sha256::new();
    for r in rows {
        h.update(r);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// NovelSum with a precomputed density profile aligned to `dataset` rows.
pub fn novelsum_with_profile(
    dataset: &EmbeddingMatrix,
    profile: &DensityProfile,
    config: &NovelSumConfig,
) -> Result<(MetricReport, NoveltyBreakdown), NovelSumError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(NovelSumError::EmptyDataset);
    }
    check_profile(dataset.len(), profile, config)?;
    let p = Prepared::new(dataset, config.distance)?;
    let density = density_weights(profile, config.beta);
    let (novelties, row_digests) = streamed_novelties(&p, &density, config);
    let breakdown = NoveltyBreakdown {
        per_sample_novelty: novelties,
        rank_matrix_digest: digest_rows(&row_digests),
        config: config.clone(),
        sigma_source: profile.reference_id.clone(),
    };
    let mut report = MetricReport::new("novelsum", breakdown.aggregate(), config, dataset.len())
        .with_note(format!(
            "density factor is 1/sum of K={} neighbour distances (K times the inverse mean)",
            config.k
        ))
        .with_note(format!("density reference {}", profile.reference_id));
    if config.normalization == Normalization::MeanWeightedNovelty {
        let weight_total: f64 = config.proximity_weights(dataset.len() - 1).iter().sum();
        let raw: f64 = breakdown.per_sample_novelty.iter().map(|v| v * weight_total).sum();
        report = report
            .with_raw_sum(raw)
            .with_note("score is the mean of per-sample weighted-mean novelties; raw_sum is the plain novelty sum");
    }
    Ok((report, breakdown))
}

/// NovelSum of `dataset` with density factors estimated against `reference`.
pub fn novelsum(
    dataset: &EmbeddingMatrix,
    reference: &EmbeddingMatrix,
    config: &NovelSumConfig,
) -> Result<(MetricReport, NoveltyBreakdown), NovelSumError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(NovelSumError::EmptyDataset);
    }
    let profile = density_profile(dataset, reference, config.k, config.distance, config.epsilon)?;
    novelsum_with_profile(dataset, &profile, config)
}

/// Order used everywhere for "closest first, ties by lower index".
pub(crate) fn closest_first(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}
