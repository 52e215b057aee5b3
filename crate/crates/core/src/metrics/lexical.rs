use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{MetricConfig, MetricError};
use crate::io::Corpus;
use crate::report::MetricReport;

pub const VOCD_D_MIN: f64 = 0.01;
pub const VOCD_D_MAX: f64 = 1000.0;

/// Sampling seed for one sample, derived from the global seed and the sample's
/// tokens so that results do not depend on corpus order.
pub fn sample_seed(seed: u64, tokens: &[String]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for t in tokens {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn distinct_ratio<'a>(tokens: impl Iterator<Item = &'a String>, len: usize) -> f64 {
    let set: HashSet<&str> = tokens.map(String::as_str).collect();
    set.len() as f64 / len as f64
}

fn sampled_ttr(tokens: &[String], len: usize, rng: &mut ChaCha8Rng) -> f64 {
    if tokens.len() <= len {
        return distinct_ratio(tokens.iter(), tokens.len());
    }
    let picks = index::sample(rng, tokens.len(), len);
    distinct_ratio(picks.iter().map(|i| &tokens[i]), len)
}

/// Mean type-token ratio over samples, each on `ttr_sample_len` tokens drawn
/// without replacement (all tokens when the sample is shorter).
pub fn ttr(corpus: &Corpus, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut short = 0usize;
    let total: f64 = corpus
        .samples()
        .iter()
        .map(|s| {
            if s.len() < config.ttr_sample_len {
                short += 1;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.seed, s));
            sampled_ttr(s, config.ttr_sample_len, &mut rng)
        })
        .sum();
    let mut report = MetricReport::new("ttr", total / corpus.len() as f64, config, corpus.len());
    if short > 0 {
        report = report.with_note(format!(
            "{short} samples shorter than {} tokens used in full",
            config.ttr_sample_len
        ));
    }
    Ok(report)
}

/// Expected TTR at sample length `k` under the vocd-D model with parameter `d`.
pub fn vocd_curve(k: f64, d: f64) -> f64 {
    d / k * ((1.0 + 2.0 * k / d).sqrt() - 1.0)
}

/// Observed mean TTR for each usable length: `(k, mean TTR over samples of length >= k)`.
pub fn vocd_observed(corpus: &Corpus, config: &MetricConfig) -> Result<Vec<(usize, f64)>, MetricError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let lengths = &config.vocd_lengths;
    let mut sums = vec![0.0f64; lengths.len()];
    let mut counts = vec![0usize; lengths.len()];
    for s in corpus.samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.seed, s));
        for (li, &k) in lengths.iter().enumerate() {
            if s.len() < k {
                break;
            }
            let mean = (0..config.vocd_subsamples)
                .map(|_| {
                    let picks = index::sample(&mut rng, s.len(), k);
                    distinct_ratio(picks.iter().map(|i| &s[i]), k)
                })
                .sum::<f64>()
                / config.vocd_subsamples as f64;
            sums[li] += mean;
            counts[li] += 1;
        }
    }
    let observed: Vec<(usize, f64)> = lengths
        .iter()
        .zip(sums.iter().zip(&counts))
        .filter(|(_, (_, &c))| c > 0)
        .map(|(&k, (&s, &c))| (k, s / c as f64))
        .collect();
    if observed.is_empty() {
        return Err(MetricError::NoUsableSamples);
    }
    Ok(observed)
}

fn vocd_loss(observed: &[(usize, f64)], d: f64) -> f64 {
    observed
        .iter()
        .map(|&(k, t)| (t - vocd_curve(k as f64, d)).powi(2))
        .sum()
}

/// Least-squares D over `[0.01, 1000]`: log-spaced scan, then golden-section
/// refinement inside the bracket around the best grid point.
pub fn fit_vocd_curve(observed: &[(usize, f64)]) -> f64 {
    const GRID: usize = 400;
    let (lo, hi) = (VOCD_D_MIN.ln(), VOCD_D_MAX.ln());
    let grid: Vec<f64> = (0..GRID)
        .map(|i| (lo + (hi - lo) * i as f64 / (GRID - 1) as f64).exp())
        .collect();
    let losses: Vec<f64> = grid.iter().map(|&d| vocd_loss(observed, d)).collect();
    let best = (0..GRID)
        .min_by(|&a, &b| losses[a].total_cmp(&losses[b]))
        .unwrap();
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(GRID - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (vocd_loss(observed, c), vocd_loss(observed, d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = vocd_loss(observed, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = vocd_loss(observed, d);
        }
    }
    let refined = (a + b) / 2.0;
    [refined, grid[best], VOCD_D_MIN, VOCD_D_MAX]
        .into_iter()
        .min_by(|&x, &y| vocd_loss(observed, x).total_cmp(&vocd_loss(observed, y)))
        .unwrap()
}

/// vocd-D: a single D fitted jointly across all usable sub-sample lengths.
pub fn vocd_d(corpus: &Corpus, config: &MetricConfig) -> Result<MetricReport, MetricError> {
    let observed = vocd_observed(corpus, config)?;
    let d = fit_vocd_curve(&observed);
    let mut report = MetricReport::new("vocd_d", d, config, corpus.len())
        .with_note("single D fitted by least squares across all lengths");
    if observed.len() < config.vocd_lengths.len() {
        let used: Vec<String> = observed.iter().map(|(k, _)| k.to_string()).collect();
        report = report.with_note(format!("only lengths {} had usable samples", used.join(",")));
    }
    if d <= VOCD_D_MIN * 1.000_001 || d >= VOCD_D_MAX * 0.999_999 {
        report = report.with_note("fit saturated at a bound of [0.01, 1000]");
    }
    Ok(report)
}
