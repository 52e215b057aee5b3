//! Subset selection strategies. Every strategy maps `(pool, config)` to a
//! [`SelectionResult`]; greedy strategies break ties by ascending pool index.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{density_profile, DistanceKind, GeometryError, Prepared};
use crate::io::EmbeddingMatrix;
use crate::metrics::{kmeans, MetricError, DEFAULT_MAX_ITERS};
use crate::novelsum::{NovelSumConfig, NovelSumError};
use crate::report::opt_score_serde;

/// Above this many pool points QDIT computes similarities on the fly instead
/// of caching the full `N x N` similarity matrix.
const QDIT_CACHE_LIMIT: usize = 8192;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("budget {budget} exceeds the {available} available points")]
    BudgetTooLarge { budget: usize, available: usize },
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("similarity threshold exhausted the pool after {} of {budget} picks", .partial.indices.len())]
    ThresholdExhausted {
        budget: usize,
        partial: Box<SelectionResult>,
    },
    #[error("budget {budget} is not divisible by {unique} unique points")]
    IndivisibleBudget { budget: usize, unique: usize },
    #[error("invalid selection configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    NovelSum(#[from] NovelSumError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub budget: usize,
    pub seed: u64,
    /// Distance used by farthest-first and k-center selection.
    pub distance: DistanceKind,
    pub repr_threshold: f64,
    pub kmeans_clusters: usize,
    pub kmeans_max_iters: usize,
    pub duplicate_unique: Option<usize>,
    pub novel: NovelSumConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            budget: 10_000,
            seed: 0,
            distance: DistanceKind::Cosine,
            repr_threshold: 0.3,
            kmeans_clusters: 100,
            kmeans_max_iters: DEFAULT_MAX_ITERS,
            duplicate_unique: None,
            novel: NovelSumConfig::default(),
        }
    }
}

impl SelectionConfig {
    pub fn with_budget(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            ..Default::default()
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    /// Objective at the time of the pick; `None` for a random seed pick.
    #[serde(with = "opt_score_serde")]
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub strategy: String,
    pub indices: Vec<usize>,
    pub trace: Option<Vec<TraceStep>>,
    pub config: SelectionConfig,
    pub partial: bool,
}

impl SelectionResult {
    fn new(strategy: Strategy, indices: Vec<usize>, trace: Option<Vec<TraceStep>>, config: &SelectionConfig) -> Self {
        Self {
            strategy: strategy.to_string(),
            indices,
            trace,
            config: config.clone(),
            partial: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Random,
    Farthest,
    KCenterGreedy,
    ReprFilter,
    Qdit,
    KMeans,
    Duplicate,
    NovelSelect,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Random,
        Strategy::Farthest,
        Strategy::KCenterGreedy,
        Strategy::ReprFilter,
        Strategy::Qdit,
        Strategy::KMeans,
        Strategy::Duplicate,
        Strategy::NovelSelect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Farthest => "farthest",
            Strategy::KCenterGreedy => "kcenter",
            Strategy::ReprFilter => "reprfilter",
            Strategy::Qdit => "qdit",
            Strategy::KMeans => "kmeans",
            Strategy::Duplicate => "duplicate",
            Strategy::NovelSelect => "novelselect",
        }
    }

    /// Runs the strategy. `reference` is only consulted by NovelSelect.
    pub fn run(
        self,
        pool: &EmbeddingMatrix,
        reference: Option<&EmbeddingMatrix>,
        config: &SelectionConfig,
    ) -> Result<SelectionResult, SelectionError> {
        match self {
            Strategy::Random => random_select(pool, config),
            Strategy::Farthest => farthest_select(pool, config),
            Strategy::KCenterGreedy => k_center_greedy(pool, config),
            Strategy::ReprFilter => repr_filter(pool, config),
            Strategy::Qdit => qdit_select(pool, config),
            Strategy::KMeans => kmeans_select(pool, config),
            Strategy::Duplicate => duplicate_construct(pool, config),
            Strategy::NovelSelect => novel_select(pool, reference, config),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match key.as_str() {
            "random" => Strategy::Random,
            "farthest" => Strategy::Farthest,
            "kcenter" | "kcentergreedy" => Strategy::KCenterGreedy,
            "reprfilter" | "repr" => Strategy::ReprFilter,
            "qdit" => Strategy::Qdit,
            "kmeans" => Strategy::KMeans,
            "duplicate" => Strategy::Duplicate,
            "novelselect" | "novel" => Strategy::NovelSelect,
            _ => return Err(format!("unknown strategy {s:?}")),
        })
    }
}

fn check_budget(budget: usize, available: usize) -> Result<(), SelectionError> {
    if budget == 0 {
        return Err(SelectionError::ZeroBudget);
    }
    if budget > available {
        return Err(SelectionError::BudgetTooLarge { budget, available });
    }
    Ok(())
}

/// Lowest index attaining the maximum of `value` over `candidates`.
fn argmax(candidates: impl Iterator<Item = usize>, value: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for c in candidates {
        let v = value(c);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((c, v));
        }
    }
    best
}

pub fn random_select(pool: &EmbeddingMatrix, config: &SelectionConfig) -> Result<SelectionResult, SelectionError> {
    check_budget(config.budget, pool.len())?;
    let indices = index::sample(&mut config.rng(), pool.len(), config.budget).into_vec();
    Ok(SelectionResult::new(Strategy::Random, indices, None, config))
}

/// Top-`budget` points by total distance to the whole pool.
pub fn farthest_select(pool: &EmbeddingMatrix, config: &SelectionConfig) -> Result<SelectionResult, SelectionError> {
    check_budget(config.budget, pool.len())?;
    let p = Prepared::new(pool, config.distance)?;
    let n = pool.len();
    let totals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| p.distance(i, &p, j)).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
    order.truncate(config.budget);
    let trace = order
        .iter()
        .map(|&i| TraceStep { index: i, objective: Some(totals[i]) })
        .collect();
    Ok(SelectionResult::new(Strategy::Farthest, order, Some(trace), config))
}

/// Greedy max-min selection from a random start.
pub fn k_center_greedy(pool: &EmbeddingMatrix, config: &SelectionConfig) -> Result<SelectionResult, SelectionError> {
    check_budget(config.budget, pool.len())?;
    let start = config.rng().random_range(0..pool.len());
    k_center_from(pool, start, config)
}

/// Greedy max-min selection from a given first point.
pub fn k_center_from(
    pool: &EmbeddingMatrix,
    start: usize,
    config: &SelectionConfig,
) -> Result<SelectionResult, SelectionError> {
    check_budget(config.budget, pool.len())?;
    if start >= pool.len() {
        return Err(SelectionError::InvalidConfig(format!("start index {start} out of range")));
    }
    let p = Prepared::new(pool, config.distance)?;
    let n = pool.len();
    let mut chosen = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    let mut indices = Vec::with_capacity(config.budget);
    let mut trace = Vec::with_capacity(config.budget);
    let mut next = (start, None);
    loop {
        let (c, objective) = next;
        indices.push(c);
        trace.push(TraceStep { index: c, objective });
        chosen[c] = true;
        if indices.len() == config.budget {
            break;
        }
        min_dist.par_iter_mut().enumerate().for_each(|(j, m)| {
            let d = p.distance(c, &p, j);
            if d < *m {
                *m = d;
            }
        });
        let (best, v) = argmax((0..n).filter(|&j| !chosen[j]), |j| min_dist[j]).expect("budget <= pool");
        next = (best, Some(v));
    }
    Ok(SelectionResult::new(Strategy::KCenterGreedy, indices, Some(trace), config))
}

/// Random-order scan accepting points whose cosine similarity to every
/// accepted point stays below the threshold.
pub fn repr_filter(pool: &EmbeddingMatrix, config: &SelectionConfig) -> Result<SelectionResult, SelectionError> {
    check_budget(config.budget, pool.len())?;
    let p = Prepared::new(pool, DistanceKind::Cosine)?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut config.rng());
    let mut indices: Vec<usize> = Vec::with_capacity(config.budget);
    let mut trace = Vec::with_capacity(config.budget);
    for c in order {
        let max_sim = indices
            .par_iter()
            .map(|&s| p.similarity(c, &p, s))
            .reduce(|| f64::NEG_INFINITY, f64::max);
        if indices.is_empty() || max_sim < config.repr_threshold {
            trace.push(TraceStep {
                index: c,
                objective: (!indices.is_empty()).then_some(max_sim),
            });
            indices.push(c);
            if indices.len() == config.budget {
                return Ok(SelectionResult::new(Strategy::ReprFilter, indices, Some(trace), config));
            }
        }
    }
    let mut partial = SelectionResult::new(Strategy::ReprFilter, indices, Some(trace), config);
    partial.partial = true;
    Err(SelectionError::ThresholdExhausted {
        budget: config.budget,
        partial: Box::new(partial),
    })
}

enum SimSource<'a> {
    Cached { n: usize, sims: Vec<f64> },
    OnTheFly(Prepared<'a>),
}

impl SimSource<'_> {
    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            SimSource::Cached { n, sims } => sims[i * n + j],
            SimSource::OnTheFly(p) => p.similarity(i, p, j),
        }
    }
}

/// Greedy facility-location maximisation over cosine similarity. The first
/// pick is the point with the highest total similarity to the pool.
pub fn qdit_select(pool: &EmbeddingMatrix, config: &SelectionConfig) -> Result<SelectionResult, SelectionError> {
    check_budget(config.budget, pool.len())?;
    let n = pool.len();
    let p = Prepared::new(pool, DistanceKind::Cosine)?;
    let sims = if n <= QDIT_CACHE_LIMIT {
        let mut sims = vec![0.0; n * n];
        sims.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, s) in row.iter_mut().enumerate() {
                *s = p.similarity(i, &p, j);
            }
        });
        SimSource::Cached { n, sims }
    } else {
        SimSource::OnTheFly(p)
    };
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut chosen = vec![false; n];
    let mut indices = Vec::with_capacity(config.budget);
    let mut trace = Vec::with_capacity(config.budget);
    for _ in 0..config.budget {
        let objectives: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|c| {
                if chosen[c] {
                    return f64::NEG_INFINITY;
                }
                (0..n).map(|j| best[j].max(sims.get(c, j))).sum()
            })
            .collect();
        let (c, v) = argmax((0..n).filter(|&c| !chosen[c]), |c| objectives[c]).expect("budget <= pool");
        chosen[c] = true;
        for (j, b) in best.iter_mut().enumerate() {
            *b = b.max(sims.get(c, j));
        }
        indices.push(c);
        trace.push(TraceStep { index: c, objective: Some(v) });
    }
    Ok(SelectionResult::new(Strategy::Qdit, indices, Some(trace), config))
}

/// Per-cluster quotas: `budget / K` each, remainder one-each to the largest
/// clusters, then any deficit from undersized clusters handed to clusters with
/// spare members in proportion to their size.
pub fn cluster_quotas(sizes: &[usize], budget: usize) -> Vec<usize> {
    let k = sizes.len();
    let mut by_size: Vec<usize> = (0..k).collect();
    by_size.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut quota = vec![budget / k; k];
    for &c in by_size.iter().take(budget % k) {
        quota[c] += 1;
    }
    let mut deficit = 0;
    for c in 0..k {
        if quota[c] > sizes[c] {
            deficit += quota[c] - sizes[c];
            quota[c] = sizes[c];
        }
    }
    while deficit > 0 {
        let eligible: Vec<usize> = by_size.iter().copied().filter(|&c| quota[c] < sizes[c]).collect();
        assert!(!eligible.is_empty(), "budget exceeds pool size");
        let weight: usize = eligible.iter().map(|&c| sizes[c]).sum();
        let mut given = 0;
        for &c in &eligible {
            let share = (deficit * sizes[c] / weight).min(sizes[c] - quota[c]);
            quota[c] += share;
            given += share;
        }
        if given == 0 {
            for &c in &eligible {
                if given == deficit {
                    break;
                }
                quota[c] += 1;
                given += 1;
            }
        }
        deficit -= given;
    }
    quota
}

/// K-means on the pool, then uniform sampling without replacement inside each cluster.
pub fn kmeans_select(pool: &EmbeddingMatrix, config: &SelectionConfig) -> Result<SelectionResult, SelectionError> {
    check_budget(config.budget, pool.len())?;
    let k = config.kmeans_clusters;
    if k == 0 || k > pool.len() {
        return Err(SelectionError::InvalidConfig(format!(
            "kmeans_clusters {k} must lie in 1..={}",
            pool.len()
        )));
    }
    let km = kmeans(pool, k, config.seed, config.kmeans_max_iters)?;
    let mut members = vec![Vec::new(); k];
    for (i, &c) in km.assignments.iter().enumerate() {
        members[c].push(i);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let quota = cluster_quotas(&sizes, config.budget);
    let mut rng = config.rng();
    let mut indices = Vec::with_capacity(config.budget);
    for (m, &q) in members.iter().zip(&quota) {
        if q > 0 {
            indices.extend(index::sample(&mut rng, m.len(), q).iter().map(|p| m[p]));
        }
    }
    Ok(SelectionResult::new(Strategy::KMeans, indices, None, config))
}

/// `m` distinct random points, each repeated `budget / m` times consecutively.
pub fn duplicate_construct(pool: &EmbeddingMatrix, config: &SelectionConfig) -> Result<SelectionResult, SelectionError> {
    let m = config
        .duplicate_unique
        .ok_or_else(|| SelectionError::InvalidConfig("duplicate selection needs a unique-point count".into()))?;
    if config.budget == 0 {
        return Err(SelectionError::ZeroBudget);
    }
    if m == 0 || !config.budget.is_multiple_of(m) {
        return Err(SelectionError::IndivisibleBudget {
            budget: config.budget,
            unique: m,
        });
    }
    check_budget(m, pool.len())?;
    let reps = config.budget / m;
    let unique = index::sample(&mut config.rng(), pool.len(), m).into_vec();
    let indices = unique.iter().flat_map(|&i| std::iter::repeat_n(i, reps)).collect();
    Ok(SelectionResult::new(Strategy::Duplicate, indices, None, config))
}

/// Proximity-weighted novelty of `candidate` against `selected`:
/// `sum_r w_r * sigma_{s_r}^beta * d(candidate, s_r)` with selected points ranked
/// by density-aware distance. `density` holds `sigma^beta` per pool point.
pub fn novelty_against(
    pool: &Prepared<'_>,
    density: &[f64],
    selected: &[usize],
    candidate: usize,
    config: &NovelSumConfig,
) -> f64 {
    let mut d: Vec<(f64, usize)> = selected
        .iter()
        .map(|&s| (density[s] * pool.distance(candidate, pool, s), s))
        .collect();
    d.sort_by(crate::novelsum::closest_first);
    d.iter()
        .enumerate()
        .map(|(r, &(v, _))| (1.0 / (r + 1) as f64).powf(config.alpha) * v)
        .sum()
}

/// Greedy novelty maximisation. The first pick is uniform at random (every
/// candidate has zero novelty against the empty set); each later step picks the
/// candidate with the highest novelty against the current selection.
pub fn novel_select(
    pool: &EmbeddingMatrix,
    reference: Option<&EmbeddingMatrix>,
    config: &SelectionConfig,
) -> Result<SelectionResult, SelectionError> {
    check_budget(config.budget, pool.len())?;
    let nc = &config.novel;
    nc.validate()?;
    let profile = density_profile(pool, reference.unwrap_or(pool), nc.k, nc.distance, nc.epsilon)?;
    let density: Vec<f64> = profile.sigma.iter().map(|s| s.powf(nc.beta)).collect();
    let p = Prepared::new(pool, nc.distance)?;
    let n = pool.len();
    let budget = config.budget;
    let weights = nc.proximity_weights(budget);

    // per candidate: density-aware distances to the selection, ascending
    let mut sorted: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(budget - 1)).collect();
    let mut value = vec![0.0f64; n];
    let mut chosen = vec![false; n];
    let mut indices = Vec::with_capacity(budget);
    let mut trace = Vec::with_capacity(budget);
    let mut pick = (config.rng().random_range(0..n), 0.0);
    loop {
        let (s, v) = pick;
        chosen[s] = true;
        indices.push(s);
        trace.push(TraceStep { index: s, objective: Some(v) });
        if indices.len() == budget {
            break;
        }
        let ds = density[s];
        sorted
            .par_iter_mut()
            .zip(value.par_iter_mut())
            .enumerate()
            .for_each(|(c, (list, val))| {
                if chosen[c] {
                    return;
                }
                let d = ds * p.distance(c, &p, s);
                let pos = list.partition_point(|&x| x <= d);
                list.insert(pos, d);
                *val = list.iter().zip(&weights).map(|(x, w)| w * x).sum();
            });
        pick = argmax((0..n).filter(|&c| !chosen[c]), |c| value[c]).expect("budget <= pool");
    }
    Ok(SelectionResult::new(Strategy::NovelSelect, indices, Some(trace), config))
}
