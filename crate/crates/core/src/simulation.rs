//! Two-dimensional simulation: a clustered source cloud, three 20-point
//! selections (redundant clusters, k-center spread, novelty-driven) and their
//! scores under DistSum, proximity-weighted DistSum and NovelSum.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{squared_l2, DistanceKind};
use crate::io::{format_score, EmbeddingMatrix};
use crate::metrics::{dist_sum, MetricConfig, MetricError};
use crate::novelsum::{novelsum, NovelSumConfig, NovelSumError, Normalization};
use crate::selection::{k_center_greedy, novel_select, SelectionConfig, SelectionError};

pub const CSV_HEADER: &str = "selection,metric,score,flag";
pub const DISTSUM_TOLERANCE: f64 = 0.15;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid cluster spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    NovelSum(#[from] NovelSumError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub center: [f64; 2],
    pub count: usize,
    pub spread: f64,
}

/// Missing fields in a deserialized spec take their default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSpec {
    pub clusters: Vec<ClusterSpec>,
    /// Points are clipped to `[0, box_size]^2`.
    pub box_size: f64,
    pub selection_size: usize,
    /// Indices into `clusters` whose centers anchor selection A.
    pub redundant_clusters: [usize; 2],
    /// Distance for DistSum.
    pub distsum_distance: DistanceKind,
    /// Distance for the proximity-weighted DistSum.
    pub proximity_distance: DistanceKind,
    /// Distance for NovelSum.
    pub novelty_distance: DistanceKind,
    /// Distance NovelSelect uses to build selection C.
    pub selection_distance: DistanceKind,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            // A loose far anchor, a tight core with dense satellites and a broad
            // fringe. Selection A pairs the fringe with the far anchor.
            clusters: vec![
                ClusterSpec { center: [9.5, 5.0], count: 14, spread: 0.7 },
                ClusterSpec { center: [4.0, 5.5], count: 38, spread: 0.23 },
                ClusterSpec { center: [2.5, 5.8], count: 22, spread: 0.053 },
                ClusterSpec { center: [2.0, 8.3], count: 18, spread: 0.028 },
                ClusterSpec { center: [3.0, 7.4], count: 34, spread: 0.3 },
                ClusterSpec { center: [3.5, 8.4], count: 24, spread: 0.41 },
            ],
            box_size: 10.0,
            selection_size: 20,
            redundant_clusters: [5, 0],
            distsum_distance: DistanceKind::SquaredL2,
            proximity_distance: DistanceKind::Euclidean,
            novelty_distance: DistanceKind::SquaredL2,
            selection_distance: DistanceKind::SquaredL2,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidSpec(m));
        if self.clusters.is_empty() {
            return bad("no clusters".into());
        }
        if !(self.box_size > 0.0 && self.box_size.is_finite()) {
            return bad(format!("box size {} must be positive", self.box_size));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            if !(c.spread >= 0.0 && c.spread.is_finite()) || c.center.iter().any(|v| !v.is_finite()) {
                return bad(format!("cluster {i} has a non-finite center or negative spread"));
            }
        }
        let total: usize = self.clusters.iter().map(|c| c.count).sum();
        if self.selection_size == 0 || !self.selection_size.is_multiple_of(2) || self.selection_size > total {
            return bad(format!(
                "selection size {} must be even, positive and at most {total}",
                self.selection_size
            ));
        }
        if self.redundant_clusters.iter().any(|&c| c >= self.clusters.len()) {
            return bad("redundant cluster index out of range".into());
        }
        Ok(())
    }

    /// NovelSum configuration used for scoring; distance is `novelty_distance`.
    pub fn novel_config(&self) -> NovelSumConfig {
        NovelSumConfig {
            distance: self.novelty_distance,
            ..Default::default()
        }
    }
}

pub fn generate_source(seed: u64, spec: &SimulationSpec) -> Result<EmbeddingMatrix, SimulationError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(2 * spec.clusters.iter().map(|c| c.count).sum::<usize>());
    for c in &spec.clusters {
        let normal = Normal::new(0.0, c.spread).map_err(|e| SimulationError::InvalidSpec(e.to_string()))?;
        for _ in 0..c.count {
            for center in c.center {
                let v = center + normal.sample(&mut rng);
                data.push(v.clamp(0.0, spec.box_size) as f32);
            }
        }
    }
    Ok(EmbeddingMatrix::new(2, data).expect("clipped points are finite"))
}

/// Redundant selection: the points nearest to each of two cluster centers, disjoint.
pub fn build_selection_a(source: &EmbeddingMatrix, spec: &SimulationSpec) -> Result<Vec<usize>, SimulationError> {
    spec.validate()?;
    let per_center = spec.selection_size / 2;
    let mut taken = vec![false; source.len()];
    let mut out = Vec::with_capacity(spec.selection_size);
    for &c in &spec.redundant_clusters {
        let center = spec.clusters[c].center.map(|v| v as f32);
        let mut order: Vec<(f64, usize)> = (0..source.len())
            .filter(|&i| !taken[i])
            .map(|i| (squared_l2(source.row(i), &center), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in order.iter().take(per_center) {
            taken[i] = true;
            out.push(i);
        }
    }
    Ok(out)
}

fn selection_config(spec: &SimulationSpec, seed: u64) -> SelectionConfig {
    SelectionConfig {
        distance: DistanceKind::SquaredL2,
        novel: NovelSumConfig {
            distance: spec.selection_distance,
            ..spec.novel_config()
        },
        ..SelectionConfig::with_budget(spec.selection_size, seed)
    }
}

/// Spread-out selection via k-center greedy.
pub fn build_selection_b(source: &EmbeddingMatrix, spec: &SimulationSpec, seed: u64) -> Result<Vec<usize>, SimulationError> {
    Ok(k_center_greedy(source, &selection_config(spec, seed))?.indices)
}

/// Novelty-driven selection against the source as density reference.
pub fn build_selection_c(source: &EmbeddingMatrix, spec: &SimulationSpec, seed: u64) -> Result<Vec<usize>, SimulationError> {
    Ok(novel_select(source, Some(source), &selection_config(spec, seed))?.indices)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub seed: u64,
    pub spec: SimulationSpec,
    pub source: Vec<[f32; 2]>,
    pub selection_a: Vec<usize>,
    pub selection_b: Vec<usize>,
    pub selection_c: Vec<usize>,
}

impl SimulationScenario {
    pub fn build(seed: u64, spec: &SimulationSpec) -> Result<Self, SimulationError> {
        let source = generate_source(seed, spec)?;
        Ok(Self {
            seed,
            spec: spec.clone(),
            selection_a: build_selection_a(&source, spec)?,
            selection_b: build_selection_b(&source, spec, seed)?,
            selection_c: build_selection_c(&source, spec, seed)?,
            source: source.rows().map(|r| [r[0], r[1]]).collect(),
        })
    }

    pub fn source_matrix(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::new(2, self.source.iter().flatten().copied().collect()).expect("finite source")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMetric {
    Distsum,
    ProximityWeightedDistsum,
    Novelsum,
}

impl SimMetric {
    pub const ALL: [SimMetric; 3] = [SimMetric::Distsum, SimMetric::ProximityWeightedDistsum, SimMetric::Novelsum];

    pub fn name(self) -> &'static str {
        match self {
            SimMetric::Distsum => "distsum",
            SimMetric::ProximityWeightedDistsum => "proximity_weighted_distsum",
            SimMetric::Novelsum => "novelsum",
        }
    }
}

/// Scores of one selection under the three metrics, in [`SimMetric::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScores {
    pub distsum: f64,
    pub proximity_weighted_distsum: f64,
    pub novelsum: f64,
}

impl SelectionScores {
    pub fn get(&self, m: SimMetric) -> f64 {
        match m {
            SimMetric::Distsum => self.distsum,
            SimMetric::ProximityWeightedDistsum => self.proximity_weighted_distsum,
            SimMetric::Novelsum => self.novelsum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    /// `|DistSum(A) - DistSum(C)| / DistSum(C) <= 0.15`.
    pub distsum_a_approx_c: bool,
    pub proximity_b_gt_c: bool,
    pub novelsum_a_lt_b_lt_c: bool,
}

impl Claims {
    pub fn all(&self) -> bool {
        self.distsum_a_approx_c && self.proximity_b_gt_c && self.novelsum_a_lt_b_lt_c
    }

    pub fn for_metric(&self, m: SimMetric) -> bool {
        match m {
            SimMetric::Distsum => self.distsum_a_approx_c,
            SimMetric::ProximityWeightedDistsum => self.proximity_b_gt_c,
            SimMetric::Novelsum => self.novelsum_a_lt_b_lt_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub a: SelectionScores,
    pub b: SelectionScores,
    pub c: SelectionScores,
    pub claims: Claims,
}

pub fn score_selection(
    source: &EmbeddingMatrix,
    selection: &[usize],
    spec: &SimulationSpec,
) -> Result<SelectionScores, SimulationError> {
    let subset = source.select(selection).expect("selection indices lie in the source");
    let distsum = dist_sum(
        &subset,
        &MetricConfig {
            distance: spec.distsum_distance,
            ..Default::default()
        },
    )?
    .score;
    let full = spec.novel_config();
    let proximity = NovelSumConfig {
        beta: 0.0,
        normalization: Normalization::RawSum,
        distance: spec.proximity_distance,
        ..full.clone()
    };
    Ok(SelectionScores {
        distsum,
        proximity_weighted_distsum: novelsum(&subset, source, &proximity)?.0.score,
        novelsum: novelsum(&subset, source, &full)?.0.score,
    })
}

pub fn evaluate_claims(a: &SelectionScores, b: &SelectionScores, c: &SelectionScores) -> Claims {
    let rel = if c.distsum == a.distsum {
        0.0
    } else {
        (a.distsum - c.distsum).abs() / c.distsum
    };
    Claims {
        distsum_a_approx_c: rel <= DISTSUM_TOLERANCE,
        proximity_b_gt_c: b.proximity_weighted_distsum > c.proximity_weighted_distsum,
        novelsum_a_lt_b_lt_c: a.novelsum < b.novelsum && b.novelsum < c.novelsum,
    }
}

pub fn score_scenario(scenario: &SimulationScenario) -> Result<StudyReport, SimulationError> {
    let source = scenario.source_matrix();
    let a = score_selection(&source, &scenario.selection_a, &scenario.spec)?;
    let b = score_selection(&source, &scenario.selection_b, &scenario.spec)?;
    let c = score_selection(&source, &scenario.selection_c, &scenario.spec)?;
    Ok(StudyReport {
        seed: scenario.seed,
        claims: evaluate_claims(&a, &b, &c),
        a,
        b,
        c,
    })
}

pub fn simulate_study(seed: u64, spec: &SimulationSpec) -> Result<(SimulationScenario, StudyReport), SimulationError> {
    let scenario = SimulationScenario::build(seed, spec)?;
    let report = score_scenario(&scenario)?;
    Ok((scenario, report))
}

/// Writes the score rows; each row's flag is the claim for its metric. With
/// `with_seed` a leading seed column is added.
pub fn write_study_csv<W: Write>(reports: &[StudyReport], with_seed: bool, mut w: W) -> Result<(), SimulationError> {
    if with_seed {
        write!(w, "seed,")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        for (name, scores) in [("A", &r.a), ("B", &r.b), ("C", &r.c)] {
            for m in SimMetric::ALL {
                if with_seed {
                    write!(w, "{},", r.seed)?;
                }
                let flag = if r.claims.for_metric(m) { "pass" } else { "fail" };
                writeln!(w, "{name},{},{},{flag}", m.name(), format_score(scores.get(m)))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassCounts {
    pub distsum_a_approx_c: usize,
    pub proximity_b_gt_c: usize,
    pub novelsum_a_lt_b_lt_c: usize,
    pub all: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub seeds: Vec<u64>,
    pub runs: usize,
    pub pass_counts: PassCounts,
    pub failed_seeds: Vec<u64>,
}

pub fn summarize(reports: &[StudyReport]) -> StudySummary {
    let count = |f: fn(&Claims) -> bool| reports.iter().filter(|r| f(&r.claims)).count();
    StudySummary {
        seeds: reports.iter().map(|r| r.seed).collect(),
        runs: reports.len(),
        pass_counts: PassCounts {
            distsum_a_approx_c: count(|c| c.distsum_a_approx_c),
            proximity_b_gt_c: count(|c| c.proximity_b_gt_c),
            novelsum_a_lt_b_lt_c: count(|c| c.novelsum_a_lt_b_lt_c),
            all: count(Claims::all),
        },
        failed_seeds: reports.iter().filter(|r| !r.claims.all()).map(|r| r.seed).collect(),
    }
}
