//! Diversity measurement and subset selection over embedding datasets.
//!
//! The central metric is NovelSum ([`novelsum::novelsum`]): each sample's
//! novelty is a proximity-weighted sum of density-aware distances to the rest
//! of the dataset. Baseline metrics, selection strategies, correlation analysis
//! and a 2D simulation study are provided alongside.

pub mod analysis;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod novelsum;
pub mod report;
pub mod selection;
pub mod simulation;

pub use geometry::{DensityProfile, DistanceKind};
pub use io::{Corpus, DatasetError, EmbeddingMatrix, ScoreTable};
pub use metrics::{MetricConfig, MetricError};
pub use novelsum::{NovelSumConfig, Normalization, NoveltyBreakdown};
pub use report::MetricReport;
pub use selection::{SelectionConfig, SelectionResult, Strategy};
