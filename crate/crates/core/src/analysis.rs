//! Performance aggregation and metric/performance correlation.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::ScoreTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input has zero variance")]
    DegenerateVariance,
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("score table has no performance column")]
    MissingPerformance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub metric_name: String,
    pub pearson: f64,
    pub spearman: f64,
    pub average: f64,
    pub n_points: usize,
    pub excluded_rows: Vec<String>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
fn std_dev(x: &[f64], m: f64) -> f64 {
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

fn zscores(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let s = std_dev(x, m);
    if s == 0.0 {
        warn!("constant score list contributes zeros to the aggregate");
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - m) / s).collect()
}

/// Sum of per-list z-scores (population std). A constant list contributes zeros.
pub fn zscore_aggregate(scores_a: &[f64], scores_b: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    zscore_aggregate_many(&[scores_a, scores_b])
}

/// [`zscore_aggregate`] over any number of benchmark columns.
pub fn zscore_aggregate_many(columns: &[&[f64]]) -> Result<Vec<f64>, AnalysisError> {
    let Some(first) = columns.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    if let Some(bad) = columns.iter().find(|c| c.len() != n) {
        return Err(AnalysisError::LengthMismatch { left: n, right: bad.len() });
    }
    if n < 2 {
        return Err(AnalysisError::TooFewRows { needed: 2, got: n });
    }
    if columns.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(AnalysisError::NonFiniteInput);
    }
    let mut out = vec![0.0; n];
    for c in columns {
        for (o, z) in out.iter_mut().zip(zscores(c)) {
            *o += z;
        }
    }
    Ok(out)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(AnalysisError::TooFewRows { needed: 3, got: x.len() });
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(x, y)?;
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFiniteInput);
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based average ranks; `-inf` sorts below every finite value.
pub fn average_ranks(x: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if x.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(AnalysisError::NonFiniteInput);
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    Ok(ranks)
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(x, y)?;
    pearson(&average_ranks(x)?, &average_ranks(y)?)
}

/// Correlation of each metric column with performance. Pearson drops rows whose
/// metric value is non-finite; Spearman keeps them at the bottom of the ranking.
pub fn correlate_metrics(table: &ScoreTable) -> Result<Vec<CorrelationReport>, AnalysisError> {
    if !table.has_performance() {
        return Err(AnalysisError::MissingPerformance);
    }
    let perf: Vec<f64> = table
        .rows()
        .iter()
        .map(|r| r.performance.expect("has_performance checked"))
        .collect();
    let mut reports = Vec::with_capacity(table.metric_names().len());
    for (m, name) in table.metric_names().iter().enumerate() {
        let column: Vec<f64> = table.rows().iter().map(|r| r.scores[m]).collect();
        let mut fx = Vec::new();
        let mut fy = Vec::new();
        let mut excluded = Vec::new();
        for ((v, p), row) in column.iter().zip(&perf).zip(table.rows()) {
            if v.is_finite() {
                fx.push(*v);
                fy.push(*p);
            } else {
                excluded.push(row.dataset_id.clone());
            }
        }
        if !excluded.is_empty() {
            warn!("{name}: {} non-finite rows excluded from Pearson", excluded.len());
        }
        if fx.len() < 3 {
            return Err(AnalysisError::TooFewRows { needed: 3, got: fx.len() });
        }
        let pearson = pearson(&fx, &fy)?;
        let spearman = spearman(&column, &perf)?;
        reports.push(CorrelationReport {
            metric_name: name.clone(),
            pearson,
            spearman,
            average: (pearson + spearman) / 2.0,
            n_points: fx.len(),
            excluded_rows: excluded,
        });
    }
    Ok(reports)
}

/// Reports sorted by descending average, ties by metric name.
pub fn rank_by_average(mut reports: Vec<CorrelationReport>) -> Vec<CorrelationReport> {
    reports.sort_by(|a, b| {
        b.average
            .total_cmp(&a.average)
            .then_with(|| a.metric_name.cmp(&b.metric_name))
    });
    reports
}
