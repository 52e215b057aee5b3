//! Distances, exact k-nearest-neighbour search and density factors.
//!
//! Every kernel accumulates in `f64` and is evaluated row by row, so results do
//! not depend on how rows are partitioned across threads.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::EmbeddingMatrix;

pub const DEFAULT_DENSITY_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("row {row} has zero norm; cosine distance is undefined")]
    ZeroNormVector { row: usize },
    #[error("k = {k} exceeds the {available} available neighbours")]
    KTooLarge { k: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `1 - cos(a, b)`.
    Cosine,
    /// `||a - b||^2`, not square-rooted.
    SquaredL2,
    /// `||a - b||`.
    Euclidean,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Cosine => "cosine",
            DistanceKind::SquaredL2 => "squared_l2",
            DistanceKind::Euclidean => "euclidean",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(DistanceKind::Cosine),
            "squared_l2" | "sql2" => Ok(DistanceKind::SquaredL2),
            "euclidean" | "l2" => Ok(DistanceKind::Euclidean),
            other => Err(format!("unknown distance {other:?} (expected cosine, squared_l2 or euclidean)")),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] as f64 * y[l] as f64;
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += *x as f64 * *y as f64;
    }
    s
}

#[inline]
pub(crate) fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            let d = x[l] as f64 - y[l] as f64;
            acc[l] += d * d;
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        let d = *x as f64 - *y as f64;
        s += d * d;
    }
    s
}

/// A matrix paired with the per-row data a distance kind needs (squared norms for cosine).
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    matrix: &'a EmbeddingMatrix,
    kind: DistanceKind,
    sq_norms: Vec<f64>,
}

impl<'a> Prepared<'a> {
    pub fn new(matrix: &'a EmbeddingMatrix, kind: DistanceKind) -> Result<Self, GeometryError> {
        let sq_norms = match kind {
            DistanceKind::Cosine => {
                let norms: Vec<f64> = matrix.rows().map(|r| dot(r, r)).collect();
                if let Some(row) = norms.iter().position(|&n| n <= 0.0) {
                    return Err(GeometryError::ZeroNormVector { row });
                }
                norms
            }
            DistanceKind::SquaredL2 | DistanceKind::Euclidean => Vec::new(),
        };
        Ok(Self {
            matrix,
            kind,
            sq_norms,
        })
    }

    pub fn matrix(&self) -> &'a EmbeddingMatrix {
        self.matrix
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    fn sq_norm(&self, i: usize) -> f64 {
        self.sq_norms[i]
    }

    /// Distance between row `i` of `self` and row `j` of `other`.
    #[inline]
    pub fn distance(&self, i: usize, other: &Prepared<'_>, j: usize) -> f64 {
        let a = self.matrix.row(i);
        let b = other.matrix.row(j);
        match self.kind {
            DistanceKind::SquaredL2 => squared_l2(a, b),
            DistanceKind::Euclidean => squared_l2(a, b).sqrt(),
            DistanceKind::Cosine => {
                // sqrt(fl(s*s)) == s, so identical rows give exactly zero
                let cos = dot(a, b) / (self.sq_norm(i) * other.sq_norm(j)).sqrt();
                (1.0 - cos.clamp(-1.0, 1.0)).max(0.0)
            }
        }
    }

    /// Cosine similarity between rows; only meaningful for `DistanceKind::Cosine`.
    #[inline]
    pub fn similarity(&self, i: usize, other: &Prepared<'_>, j: usize) -> f64 {
        let cos = dot(self.matrix.row(i), other.matrix.row(j))
            / (self.sq_norm(i) * other.sq_norm(j)).sqrt();
        cos.clamp(-1.0, 1.0)
    }

    fn check_dims(&self, other: &Prepared<'_>) -> Result<(), GeometryError> {
        if self.matrix.dim() != other.matrix.dim() {
            return Err(GeometryError::DimMismatch {
                left: self.matrix.dim(),
                right: other.matrix.dim(),
            });
        }
        Ok(())
    }
}

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

pub fn pairwise_distances(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    kind: DistanceKind,
) -> Result<DistanceMatrix, GeometryError> {
    let pa = Prepared::new(a, kind)?;
    let pb = Prepared::new(b, kind)?;
    pairwise_prepared(&pa, &pb)
}

pub fn pairwise_prepared(
    pa: &Prepared<'_>,
    pb: &Prepared<'_>,
) -> Result<DistanceMatrix, GeometryError> {
    pa.check_dims(pb)?;
    let cols = pb.len();
    let mut data = vec![0.0f64; pa.len() * cols];
    if cols > 0 {
        data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
            for (j, out) in row.iter_mut().enumerate() {
                *out = pa.distance(i, pb, j);
            }
        });
    }
    Ok(DistanceMatrix::from_vec(pa.len(), cols, data))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Neighbours of one query, ascending by distance, ties by ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query: usize,
    pub neighbors: Vec<Neighbor>,
}

impl NeighborList {
    pub fn distance_sum(&self) -> f64 {
        self.neighbors.iter().map(|n| n.distance).sum()
    }

    pub fn kth(&self, k: usize) -> Option<&Neighbor> {
        k.checked_sub(1).and_then(|i| self.neighbors.get(i))
    }
}

/// How a query's own entry in the pool is recognised and dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfMatch {
    /// Nothing is excluded.
    Keep,
    /// Query `i` is pool row `i` (query set and pool are the same store).
    SameIndex,
    /// The first pool row bitwise equal to the query, if any, is dropped.
    FirstIdentical,
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

pub fn knn(
    query: &EmbeddingMatrix,
    pool: &EmbeddingMatrix,
    k: usize,
    kind: DistanceKind,
    self_match: SelfMatch,
) -> Result<Vec<NeighborList>, GeometryError> {
    let pq = Prepared::new(query, kind)?;
    let pp = Prepared::new(pool, kind)?;
    knn_prepared(&pq, &pp, k, self_match)
}

pub fn knn_prepared(
    pq: &Prepared<'_>,
    pp: &Prepared<'_>,
    k: usize,
    self_match: SelfMatch,
) -> Result<Vec<NeighborList>, GeometryError> {
    pq.check_dims(pp)?;
    if k == 0 {
        return Err(GeometryError::InvalidParameter("k must be positive".into()));
    }
    let n = pp.len();
    match self_match {
        SelfMatch::SameIndex => {
            if pq.len() != n {
                return Err(GeometryError::InvalidParameter(
                    "SameIndex requires the query set to be the pool".into(),
                ));
            }
            if k + 1 > n {
                return Err(GeometryError::KTooLarge {
                    k,
                    available: n.saturating_sub(1),
                });
            }
        }
        SelfMatch::Keep | SelfMatch::FirstIdentical => {
            if k > n {
                return Err(GeometryError::KTooLarge { k, available: n });
            }
        }
    }
    // one spare slot so a dropped self-match still leaves k neighbours
    let take = (k + 1).min(n);

    (0..pq.len())
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf: &mut Vec<(f64, usize)>, qi| {
                buf.clear();
                for j in 0..n {
                    if self_match == SelfMatch::SameIndex && j == qi {
                        continue;
                    }
                    buf.push((pq.distance(qi, pp, j), j));
                }
                let take = take.min(buf.len());
                if take < buf.len() {
                    buf.select_nth_unstable_by(take - 1, by_distance_then_index);
                    buf.truncate(take);
                }
                buf.sort_unstable_by(by_distance_then_index);
                if self_match == SelfMatch::FirstIdentical {
                    let q = pq.matrix().row(qi);
                    if let Some(pos) = buf.iter().position(|&(_, j)| pp.matrix().row(j) == q) {
                        buf.remove(pos);
                    }
                }
                if buf.len() < k {
                    return Err(GeometryError::KTooLarge {
                        k,
                        available: buf.len(),
                    });
                }
                Ok(NeighborList {
                    query: qi,
                    neighbors: buf[..k]
                        .iter()
                        .map(|&(distance, index)| Neighbor { index, distance })
                        .collect(),
                })
            },
        )
        .collect()
}

/// Per-sample density factors `sigma = 1 / max(sum of K neighbour distances, epsilon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub sigma: Vec<f64>,
    pub reference_id: String,
    pub k: usize,
    pub distance: DistanceKind,
    pub epsilon: f64,
}

impl DensityProfile {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Profile restricted to (and reordered by) the given sample indices.
    pub fn gather(&self, indices: &[usize]) -> DensityProfile {
        DensityProfile {
            sigma: indices.iter().map(|&i| self.sigma[i]).collect(),
            ..self.clone()
        }
    }
}

/// Density factors of `samples` against `reference`. A sample's own copy in the
/// reference (the first bitwise-identical row) is not counted as a neighbour.
pub fn density_profile(
    samples: &EmbeddingMatrix,
    reference: &EmbeddingMatrix,
    k: usize,
    kind: DistanceKind,
    epsilon: f64,
) -> Result<DensityProfile, GeometryError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(GeometryError::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let lists = knn(samples, reference, k, kind, SelfMatch::FirstIdentical)?;
    let sigma = lists
        .iter()
        .map(|l| 1.0 / l.distance_sum().max(epsilon))
        .collect();
    Ok(DensityProfile {
        sigma,
        reference_id: reference.fingerprint(),
        k,
        distance: kind,
        epsilon,
    })
}
