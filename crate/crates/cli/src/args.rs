use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use novelsum_core::selection::Strategy;
use novelsum_core::{DistanceKind, Normalization};

use crate::config::List;

#[derive(Debug, Parser)]
#[command(name = "novelsum", version, about = "Dataset diversity metrics and diversity-oriented subset selection")]
pub struct Cli {
    /// Worker threads for the parallel kernels. Results agree across thread counts within 1e-6.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// File of `key = value` defaults. Flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a dataset with one diversity metric and write a JSON report.
    Score(ScoreArgs),
    /// Select a subset of a pool and write a JSON selection result.
    Select(SelectArgs),
    /// Run the 2D simulation study (selections A, B, C under three metrics).
    Simulate(SimulateArgs),
    /// Correlate metric columns with performance and write a ranked CSV.
    Correlate(CorrelateArgs),
}

/// NovelSum hyperparameters shared by `score` and `select`.
#[derive(Debug, Args)]
pub struct NovelArgs {
    /// Proximity exponent: the r-th closest neighbour gets weight (1/r)^alpha. [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Density exponent applied to the target point's density factor. [default: 0.5]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Neighbours used for the density factor. [default: 10]
    #[arg(long)]
    pub k: Option<usize>,
    /// Floor for the summed neighbour distance in the density factor. [default: 1e-12]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `mean_weighted_novelty` or `raw_sum`. [default: mean_weighted_novelty]
    #[arg(long)]
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    Ttr,
    VocdD,
    /// `Some` when the name itself pins the distance (`distsum_cosine`, `distsum_l2`).
    DistSum(Option<DistanceKind>),
    KnnDistance,
    ClusterInertia,
    Vendi,
    Radius,
    Ldd,
    FacilityLocation,
    PartitionEntropy,
    NovelSum,
}

impl MetricName {
    pub fn needs_corpus(self) -> bool {
        matches!(self, MetricName::Ttr | MetricName::VocdD)
    }
}

impl FromStr for MetricName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "ttr" => MetricName::Ttr,
            "vocd" | "vocd_d" => MetricName::VocdD,
            "distsum" => MetricName::DistSum(None),
            "distsum_cosine" => MetricName::DistSum(Some(DistanceKind::Cosine)),
            "distsum_l2" | "distsum_squared_l2" => MetricName::DistSum(Some(DistanceKind::SquaredL2)),
            "distsum_euclidean" => MetricName::DistSum(Some(DistanceKind::Euclidean)),
            "knn" | "knn_distance" => MetricName::KnnDistance,
            "inertia" | "cluster_inertia" => MetricName::ClusterInertia,
            "vendi" | "vendi_score" => MetricName::Vendi,
            "radius" => MetricName::Radius,
            "ldd" | "logdet" => MetricName::Ldd,
            "fl" | "facility_location" => MetricName::FacilityLocation,
            "entropy" | "partition_entropy" => MetricName::PartitionEntropy,
            "novelsum" => MetricName::NovelSum,
            _ => return Err(format!("unknown metric {s:?}")),
        })
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricName::Ttr => "ttr",
            MetricName::VocdD => "vocd_d",
            MetricName::DistSum(_) => "distsum",
            MetricName::KnnDistance => "knn_distance",
            MetricName::ClusterInertia => "cluster_inertia",
            MetricName::Vendi => "vendi",
            MetricName::Radius => "radius",
            MetricName::Ldd => "ldd",
            MetricName::FacilityLocation => "facility_location",
            MetricName::PartitionEntropy => "partition_entropy",
            MetricName::NovelSum => "novelsum",
        })
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// ttr, vocd_d, distsum, distsum_cosine, distsum_l2, knn_distance, cluster_inertia,
    /// vendi, radius, ldd, facility_location, partition_entropy or novelsum.
    #[arg(long)]
    pub metric: MetricName,
    /// Dataset embeddings (EMB1).
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Reference pool (EMB1): density reference for novelsum (defaults to the dataset itself),
    /// pool for facility_location and partition_entropy.
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
    /// Token corpus (JSONL) for ttr and vocd_d.
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    /// partition_entropy only: JSON index list (or selection result) into the reference pool.
    /// Without it, dataset rows are assigned to their nearest pool centroid.
    #[arg(long, value_name = "FILE")]
    pub selection: Option<PathBuf>,
    /// Output report (JSON).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// cosine, squared_l2 or euclidean. [default: cosine]
    #[arg(long)]
    pub distance: Option<DistanceKind>,
    /// Seed for k-means and token subsampling. [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub novel: NovelArgs,
    /// Clusters for cluster_inertia. [default: 200]
    #[arg(long)]
    pub inertia_clusters: Option<usize>,
    /// Clusters of the reference partition for partition_entropy. [default: 1000]
    #[arg(long)]
    pub entropy_clusters: Option<usize>,
    /// Order of the Vendi score. [default: 0.5]
    #[arg(long)]
    pub vendi_alpha: Option<f64>,
    /// Neighbour rank for knn_distance. [default: 1]
    #[arg(long)]
    pub knn_k: Option<usize>,
    /// Tokens sampled per sample for ttr. [default: 30]
    #[arg(long)]
    pub ttr_sample_len: Option<usize>,
    /// Comma-separated sub-sequence lengths for vocd_d. [default: 10,20,30,40,50]
    #[arg(long)]
    pub vocd_lengths: Option<List>,
    /// Random sub-sequences per sample and length for vocd_d. [default: 100]
    #[arg(long)]
    pub vocd_subsamples: Option<usize>,
    /// Lloyd iteration cap for k-means based metrics. [default: 300]
    #[arg(long)]
    pub kmeans_max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// random, farthest, kcenter, reprfilter, qdit, kmeans, duplicate or novelselect.
    #[arg(long)]
    pub strategy: Strategy,
    /// Candidate pool (EMB1).
    #[arg(long, value_name = "FILE")]
    pub pool: PathBuf,
    /// Density reference for novelselect (EMB1). Defaults to the pool.
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
    /// Number of samples to select. [default: 10000]
    #[arg(long)]
    pub budget: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output selection result (JSON).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write the selected rows, in selection order, as EMB1.
    #[arg(long, value_name = "FILE")]
    pub emit_subset: Option<PathBuf>,
    /// Distance for farthest, kcenter and novelselect. [default: cosine]
    #[arg(long)]
    pub distance: Option<DistanceKind>,
    /// reprfilter cosine-similarity cap. [default: 0.3]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// kmeans clusters. [default: 100]
    #[arg(long)]
    pub clusters: Option<usize>,
    /// duplicate: number of unique points, must divide the budget.
    #[arg(long)]
    pub unique: Option<usize>,
    /// Lloyd iteration cap for kmeans. [default: 300]
    #[arg(long)]
    pub kmeans_max_iters: Option<usize>,
    #[command(flatten)]
    pub novel: NovelArgs,
}

/// Inclusive seed range `a..b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn seeds(self) -> Vec<u64> {
        (self.start..=self.end).collect()
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got {s:?}"))?;
        let start: u64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let end: u64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        if end < start {
            return Err(format!("empty seed range {s:?}"));
        }
        Ok(SeedRange { start, end })
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Single seed. [default: 0]
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Inclusive seed range, e.g. `0..19`. The CSV gains a leading seed column.
    #[arg(long)]
    pub seeds: Option<SeedRange>,
    /// Scenario overrides as a JSON simulation spec. [default: built-in scenario]
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Score rows (CSV).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Claim pass counts and per-seed scores (JSON).
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Score table (CSV): dataset_id, metric columns and optionally performance.
    #[arg(long, value_name = "FILE")]
    pub table: PathBuf,
    /// Build the performance column as the sum of z-scores of these benchmark columns,
    /// which are then dropped from the metric list.
    #[arg(long, value_delimiter = ',', value_name = "COLUMNS")]
    pub aggregate: Option<Vec<String>>,
    /// Correlation rows (CSV), sorted by descending average.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}
