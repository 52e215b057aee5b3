//! Baseline diversity metrics: lexical (TTR, vocd-D), distance-based
//! (DistSum, KNN distance, cluster inertia, Vendi score, radius, log-determinant)
//! and distribution-based (facility location, partition entropy).

mod kmeans;
mod lexical;
mod semantic;

pub use kmeans::{kmeans, KMeans, DEFAULT_MAX_ITERS};
pub use lexical::{fit_vocd_curve, sample_seed, ttr, vocd_curve, vocd_d, vocd_observed};
pub use semantic::{
    cluster_inertia, dist_sum, facility_location, knn_distance, ldd, partition_entropy,
    partition_entropy_by_nearest, partition_entropy_from_assignments, radius, vendi_from_eigenvalues,
    vendi_score, LDD_PIVOT_TOLERANCE, RADIUS_STD_FLOOR, VENDI_NEGATIVE_TOLERANCE,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DistanceKind, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no sample is long enough for any vocd-D length")]
    NoUsableSamples,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("selection is empty")]
    EmptySelection,
    #[error("invalid cluster count {k} for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("eigen-decomposition failed: {0}")]
    EigenFailure(String),
    #[error("kernel eigenvalue {0} is below the clipping tolerance")]
    NegativeEigenvalue(f64),
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub distance: DistanceKind,
    pub inertia_clusters: usize,
    pub entropy_clusters: usize,
    pub vendi_alpha: f64,
    pub knn_k: usize,
    pub ttr_sample_len: usize,
    pub vocd_lengths: Vec<usize>,
    pub vocd_subsamples: usize,
    pub kmeans_max_iters: usize,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            distance: DistanceKind::Cosine,
            inertia_clusters: 200,
            entropy_clusters: 1000,
            vendi_alpha: 0.5,
            knn_k: 1,
            ttr_sample_len: 30,
            vocd_lengths: vec![10, 20, 30, 40, 50],
            vocd_subsamples: 100,
            kmeans_max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |msg: &str| Err(MetricError::InvalidConfig(msg.to_string()));
        if self.inertia_clusters == 0 || self.entropy_clusters == 0 {
            return bad("cluster counts must be positive");
        }
        if !(self.vendi_alpha.is_finite() && self.vendi_alpha > 0.0) || self.vendi_alpha == 1.0 {
            return bad("vendi_alpha must lie in (0,1) or (1,inf)");
        }
        if self.knn_k == 0 || self.ttr_sample_len == 0 || self.vocd_subsamples == 0 {
            return bad("knn_k, ttr_sample_len and vocd_subsamples must be positive");
        }
        if self.kmeans_max_iters == 0 {
            return bad("kmeans_max_iters must be positive");
        }
        if self.vocd_lengths.is_empty()
            || self.vocd_lengths[0] == 0
            || self.vocd_lengths.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("vocd_lengths must be positive and strictly increasing");
        }
        Ok(())
    }
}
