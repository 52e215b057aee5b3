//! Every metric against a naive reference on random instances, and every
//! greedy selector against an exhaustive per-step recheck. Each check panics on
//! the first mismatch.

#![allow(clippy::needless_range_loop)]

use std::collections::HashSet;

use crate::common::*;
use novelsum_core::io::Corpus;
use novelsum_core::metrics::{
    cluster_inertia, dist_sum, facility_location, fit_vocd_curve, kmeans, knn_distance, ldd, partition_entropy,
    radius, sample_seed, ttr, vendi_score, vocd_curve, vocd_d, vocd_observed,
};
use novelsum_core::novelsum::novelsum;
use novelsum_core::selection::{farthest_select, k_center_greedy, novel_select, qdit_select, SelectionResult};
use novelsum_core::{DistanceKind, EmbeddingMatrix, MetricConfig, Normalization, NovelSumConfig, SelectionConfig};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 30;
const REL: f64 = 1e-6;
const ABS: f64 = 1e-9;

/// Random instance shape: `n` in `[lo, hi]`, `dim` in `[2, 16]`.
fn shape(seed: u64, lo: usize, hi: usize) -> (usize, usize) {
    let mut r = rng(seed ^ 0x5eed);
    (r.random_range(lo..=hi), r.random_range(2..=16))
}

fn instance(seed: u64, lo: usize, hi: usize) -> EmbeddingMatrix {
    let (n, dim) = shape(seed, lo, hi);
    gaussian_matrix(n, dim, seed)
}

fn random_corpus(seed: u64) -> Corpus {
    let mut r = rng(seed);
    let vocab = r.random_range(5..60);
    let samples: Vec<Vec<String>> = (0..r.random_range(3..30))
        .map(|_| {
            let len = r.random_range(1..90);
            (0..len).map(|_| format!("w{}", r.random_range(0..vocab))).collect()
        })
        .collect();
    Corpus::new(samples).unwrap()
}

fn distinct_ratio(tokens: &[&String]) -> f64 {
    tokens.iter().collect::<HashSet<_>>().len() as f64 / tokens.len() as f64
}

pub fn ttr_matches_seeded_rerun() {
    for s in 0..INSTANCES {
        let corpus = random_corpus(s);
        let cfg = MetricConfig { seed: s, ..Default::default() };
        let want: f64 = corpus
            .samples()
            .iter()
            .map(|t| {
                if t.len() <= cfg.ttr_sample_len {
                    return distinct_ratio(&t.iter().collect::<Vec<_>>());
                }
                let mut r = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, t));
                let picks: Vec<&String> = index::sample(&mut r, t.len(), cfg.ttr_sample_len)
                    .iter()
                    .map(|i| &t[i])
                    .collect();
                distinct_ratio(&picks)
            })
            .sum::<f64>()
            / corpus.len() as f64;
        assert_close(ttr(&corpus, &cfg).unwrap().score, want, REL, ABS, "ttr");
    }
}

/// Dense grid over [0.01, 1000] (step 0.01), then ternary refinement.
fn grid_fit(observed: &[(usize, f64)]) -> f64 {
    let loss = |d: f64| -> f64 {
        observed
            .iter()
            .map(|&(k, t)| (t - vocd_curve(k as f64, d)).powi(2))
            .sum()
    };
    let steps = 99_999usize;
    let best = (0..=steps)
        .map(|i| 0.01 + 0.01 * i as f64)
        .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
        .unwrap();
    let (mut lo, mut hi) = ((best - 0.01).max(0.01), (best + 0.01).min(1000.0));
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if loss(m1) < loss(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let refined = (lo + hi) / 2.0;
    [refined, best].into_iter().min_by(|a, b| loss(*a).total_cmp(&loss(*b))).unwrap()
}

pub fn vocd_matches_grid_search_fit() {
    let mut checked = 0;
    for s in 0..INSTANCES {
        let corpus = random_corpus(s + 100);
        let cfg = MetricConfig {
            seed: s,
            vocd_subsamples: 20,
            ..Default::default()
        };
        let Ok(observed) = vocd_observed(&corpus, &cfg) else { continue };
        // observed means recomputed with the same per-sample sampler
        for &(k, mean) in &observed {
            let mut sum = 0.0;
            let mut count = 0;
            for t in corpus.samples() {
                if t.len() < k {
                    continue;
                }
                let mut r = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, t));
                for &kk in cfg.vocd_lengths.iter().take_while(|&&kk| kk <= k) {
                    let m: f64 = (0..cfg.vocd_subsamples)
                        .map(|_| {
                            let p: Vec<&String> = index::sample(&mut r, t.len(), kk).iter().map(|i| &t[i]).collect();
                            distinct_ratio(&p)
                        })
                        .sum::<f64>()
                        / cfg.vocd_subsamples as f64;
                    if kk == k {
                        sum += m;
                        count += 1;
                    }
                }
            }
            assert_close(mean, sum / count as f64, 1e-12, 1e-12, "vocd observed TTR");
        }
        let d = vocd_d(&corpus, &cfg).unwrap().score;
        let want = grid_fit(&observed);
        assert_close(d, fit_vocd_curve(&observed), 0.0, 0.0, "vocd report uses the fit");
        assert_close(d, want, REL, ABS, "vocd-D fit");
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} corpora usable");
}

pub fn distsum_matches_double_loop() {
    for kind in [DistanceKind::Cosine, DistanceKind::SquaredL2] {
        for s in 0..INSTANCES {
            let m = instance(s, 2, 200);
            let rows = rows_f64(&m);
            let n = rows.len();
            let mut sum = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    sum += dist(kind, &rows[i], &rows[j]);
                }
            }
            let cfg = MetricConfig { distance: kind, ..Default::default() };
            let r = dist_sum(&m, &cfg).unwrap();
            assert_close(r.score, sum / (n * (n - 1) / 2) as f64, REL, ABS, "distsum mean");
            assert_close(r.raw_sum.unwrap(), 2.0 * sum, REL, ABS, "distsum raw sum");
        }
    }
}

pub fn knn_distance_matches_brute_force() {
    for s in 0..INSTANCES {
        let m = instance(s, 6, 200);
        let rows = rows_f64(&m);
        let k = 1 + (s as usize % 4);
        for kind in [DistanceKind::Cosine, DistanceKind::SquaredL2] {
            let want: f64 = (0..rows.len())
                .map(|i| {
                    let mut d: Vec<f64> = (0..rows.len())
                        .filter(|&j| j != i)
                        .map(|j| dist(kind, &rows[i], &rows[j]))
                        .collect();
                    d.sort_by(f64::total_cmp);
                    d[k - 1]
                })
                .sum::<f64>()
                / rows.len() as f64;
            let cfg = MetricConfig { distance: kind, knn_k: k, ..Default::default() };
            assert_close(knn_distance(&m, &cfg).unwrap().score, want, REL, ABS, "knn distance");
        }
    }
}

pub fn inertia_matches_recomputation_from_assignments() {
    for s in 0..INSTANCES {
        let m = instance(s, 10, 200);
        let rows = rows_f64(&m);
        let k = 1 + (s as usize % 8);
        let cfg = MetricConfig { inertia_clusters: k, seed: s, ..Default::default() };
        let score = cluster_inertia(&m, &cfg).unwrap().score;
        let km = kmeans(&m, k, s, cfg.kmeans_max_iters).unwrap();
        assert!(km.converged);
        let dim = m.dim();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in rows.iter().zip(&km.assignments) {
            counts[c] += 1;
            for (a, v) in sums[c].iter_mut().zip(x) {
                *a += v;
            }
        }
        let want: f64 = rows
            .iter()
            .zip(&km.assignments)
            .map(|(x, &c)| {
                x.iter()
                    .zip(&sums[c])
                    .map(|(v, s)| (v - s / counts[c] as f64).powi(2))
                    .sum::<f64>()
            })
            .sum();
        assert_close(score, want, REL, ABS, "cluster inertia");
        // fixpoint: every point sits in its nearest cluster
        for (x, &c) in rows.iter().zip(&km.assignments) {
            let d = |cc: usize| -> f64 {
                x.iter().zip(&sums[cc]).map(|(v, s)| (v - s / counts[cc] as f64).powi(2)).sum()
            };
            let best = (0..k).filter(|&cc| counts[cc] > 0).map(d).fold(f64::INFINITY, f64::min);
            assert!(d(c) <= best + 1e-6 * (1.0 + best), "point not in nearest cluster");
        }
    }
}

pub fn jacobi_oracle_sanity() {
    let mut e = jacobi_eigenvalues(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
    e.sort_by(f64::total_cmp);
    assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
}

pub fn vendi_matches_jacobi_eigensolver() {
    for s in 0..INSTANCES {
        // both the n <= dim and the n > dim path
        let m = if s % 2 == 0 { instance(s, 2, 16) } else { instance(s, 17, 120) };
        let rows = rows_f64(&m);
        let n = rows.len();
        let kernel: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { cosine_sim(&rows[i], &rows[j]) } / n as f64).collect())
            .collect();
        let eig = jacobi_eigenvalues(kernel);
        let max = eig.iter().cloned().fold(0.0, f64::max);
        let kept: Vec<f64> = eig.into_iter().filter(|&l| l > 1e-12 * max).collect();
        let total: f64 = kept.iter().sum();
        let alpha = 0.5;
        let want = (kept.iter().map(|l| (l / total).powf(alpha)).sum::<f64>().ln() / (1.0 - alpha)).exp();
        let got = vendi_score(&m, &MetricConfig::default()).unwrap().score;
        assert_close(got, want, REL, ABS, "vendi");
        assert!(got >= 1.0 - 1e-9 && got <= n as f64 + 1e-9);
    }
}

pub fn radius_matches_direct_formula() {
    for s in 0..INSTANCES {
        let m = instance(s, 2, 200);
        let rows = rows_f64(&m);
        let n = rows.len() as f64;
        let h = m.dim();
        let mut log_sum = 0.0;
        for d in 0..h {
            let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
            let sd = (rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
            log_sum += sd.max(1e-12).ln();
        }
        let want = (log_sum / h as f64).exp();
        assert_close(radius(&m, &MetricConfig::default()).unwrap().score, want, REL, ABS, "radius");
    }
}

pub fn ldd_matches_gaussian_elimination() {
    for s in 0..INSTANCES {
        let mut r = rng(s);
        let n = r.random_range(1..=20);
        let m = gaussian_matrix(n, n + r.random_range(0..20), s);
        let rows = rows_f64(&m);
        let sim: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { cosine_sim(&rows[i], &rows[j]) }).collect())
            .collect();
        let want = log_abs_det(sim);
        assert_close(ldd(&m, &MetricConfig::default()).unwrap().score, want, REL, ABS, "ldd");
    }
}

pub fn facility_location_matches_double_loop() {
    for s in 0..INSTANCES {
        let pool = instance(s, 5, 200);
        let mut r = rng(s);
        let m = r.random_range(1..=pool.len().min(20));
        let picks = index::sample(&mut r, pool.len(), m).into_vec();
        let selected = pool.select(&picks).unwrap();
        let (ps, pp) = (rows_f64(&selected), rows_f64(&pool));
        let want: f64 = pp
            .iter()
            .map(|x| ps.iter().map(|c| cosine_sim(c, x)).fold(f64::NEG_INFINITY, f64::max))
            .sum();
        let got = facility_location(&selected, &pool, &MetricConfig::default()).unwrap().score;
        assert_close(got, want, REL, ABS, "facility location");
    }
}

pub fn partition_entropy_matches_histogram() {
    for s in 0..INSTANCES {
        let pool = instance(s, 20, 200);
        let k = 2 + (s as usize % 9);
        let mut r = rng(s);
        let m = r.random_range(1..=pool.len() / 2);
        let sel = index::sample(&mut r, pool.len(), m).into_vec();
        let cfg = MetricConfig { entropy_clusters: k, seed: s, ..Default::default() };
        let km = kmeans(&pool, k, s, cfg.kmeans_max_iters).unwrap();
        let mut hist = vec![0usize; k];
        for &i in &sel {
            hist[km.assignments[i]] += 1;
        }
        let want: f64 = hist
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / sel.len() as f64;
                -p * p.ln()
            })
            .sum();
        let got = partition_entropy(&sel, &pool, &cfg).unwrap().score;
        assert_close(got, want, REL, ABS, "partition entropy");
    }
}

pub fn novelsum_matches_definition() {
    for s in 0..INSTANCES {
        let mut r = rng(s);
        let data = instance(s, 2, 120);
        // a separate reference that also contains half the dataset rows
        let mut ref_rows = rows_f64(&gaussian_matrix(r.random_range(12..150), data.dim(), s + 1000));
        ref_rows.extend(rows_f64(&data).into_iter().take(data.len() / 2));
        let reference = EmbeddingMatrix::from_rows_f64(&ref_rows).unwrap();
        let config = NovelSumConfig {
            alpha: [0.0, 0.5, 1.0, 2.0][r.random_range(0..4)],
            beta: [0.0, 0.5, 1.0][r.random_range(0..3)],
            k: r.random_range(1..=10),
            distance: [DistanceKind::Cosine, DistanceKind::SquaredL2, DistanceKind::Euclidean][r.random_range(0..3)],
            normalization: if s % 2 == 0 { Normalization::RawSum } else { Normalization::MeanWeightedNovelty },
            ..Default::default()
        };
        let (d, refs) = (rows_f64(&data), rows_f64(&reference));
        let (report, breakdown) = novelsum(&data, &reference, &config).unwrap();
        let want = naive_novelties(&d, &refs, &config);
        for (g, w) in breakdown.per_sample_novelty.iter().zip(&want) {
            assert_close(*g, *w, REL, ABS, "per-sample novelty");
        }
        assert_close(report.score, naive_novelsum(&d, &refs, &config), REL, ABS, "novelsum");
    }
}

fn selection_fixture(s: u64) -> (EmbeddingMatrix, SelectionConfig) {
    let mut r = rng(s);
    let pool = instance(s, 20, 100);
    let budget = r.random_range(2..=20);
    let cfg = SelectionConfig {
        distance: [DistanceKind::Cosine, DistanceKind::SquaredL2][s as usize % 2],
        ..SelectionConfig::with_budget(budget, s)
    };
    (pool, cfg)
}

/// Selected indices are unique and the trace mirrors them.
fn check_shape(r: &SelectionResult, budget: usize) {
    assert_eq!(r.indices.len(), budget);
    assert_eq!(r.indices.iter().collect::<HashSet<_>>().len(), budget);
    let trace = r.trace.as_ref().expect("greedy strategies record a trace");
    assert_eq!(trace.iter().map(|t| t.index).collect::<Vec<_>>(), r.indices);
}

/// The pick at each step maximises `objective` over the unchosen pool and the
/// trace records that maximum.
fn certify(r: &SelectionResult, n: usize, first_free: bool, objective: impl Fn(&[usize], usize) -> f64, what: &str) {
    let trace = r.trace.as_ref().unwrap();
    for step in usize::from(first_free)..r.indices.len() {
        let selected = &r.indices[..step];
        let chosen = r.indices[step];
        let best = (0..n)
            .filter(|c| !selected.contains(c))
            .map(|c| objective(selected, c))
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen_value = objective(selected, chosen);
        assert!(
            close(chosen_value, best, 1e-9, 1e-12),
            "{what} step {step}: chose value {chosen_value}, best {best}"
        );
        if let Some(obj) = trace[step].objective {
            assert_close(obj, chosen_value, 1e-9, 1e-12, what);
        }
    }
}

pub fn farthest_certificate() {
    for s in 0..INSTANCES {
        let (pool, cfg) = selection_fixture(s);
        let rows = rows_f64(&pool);
        let r = farthest_select(&pool, &cfg).unwrap();
        check_shape(&r, cfg.budget);
        let total = |c: usize| rows.iter().map(|x| dist(cfg.distance, &rows[c], x)).sum::<f64>();
        certify(&r, pool.len(), false, |_, c| total(c), "farthest");
    }
}

pub fn k_center_certificate() {
    for s in 0..INSTANCES {
        let (pool, cfg) = selection_fixture(s);
        let rows = rows_f64(&pool);
        let r = k_center_greedy(&pool, &cfg).unwrap();
        check_shape(&r, cfg.budget);
        let min_dist = |sel: &[usize], c: usize| {
            sel.iter().map(|&j| dist(cfg.distance, &rows[c], &rows[j])).fold(f64::INFINITY, f64::min)
        };
        certify(&r, pool.len(), true, min_dist, "k-center");
    }
}

pub fn qdit_certificate() {
    for s in 0..INSTANCES {
        let (pool, cfg) = selection_fixture(s);
        let rows = rows_f64(&pool);
        let r = qdit_select(&pool, &cfg).unwrap();
        check_shape(&r, cfg.budget);
        let fl = |sel: &[usize], c: usize| -> f64 {
            rows.iter()
                .map(|x| {
                    sel.iter()
                        .chain(std::iter::once(&c))
                        .map(|&j| cosine_sim(&rows[j], x))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum()
        };
        certify(&r, pool.len(), false, fl, "qdit");
    }
}

pub fn novel_select_certificate() {
    for s in 0..INSTANCES {
        let (pool, mut cfg) = selection_fixture(s);
        cfg.novel.distance = cfg.distance;
        cfg.novel.k = 1 + s as usize % 10;
        let rows = rows_f64(&pool);
        let reference = (s % 3 == 0).then(|| gaussian_matrix(40, pool.dim(), s + 7));
        let refs = reference.as_ref().map(rows_f64).unwrap_or_else(|| rows.clone());
        let sigma = naive_sigma(&rows, &refs, cfg.novel.k, cfg.novel.distance, cfg.novel.epsilon);
        let r = novel_select(&pool, reference.as_ref(), &cfg).unwrap();
        check_shape(&r, cfg.budget);
        let novelty = |sel: &[usize], c: usize| naive_novelty_against(&rows, &sigma, sel, c, &cfg.novel);
        certify(&r, pool.len(), true, novelty, "novelselect");
    }
}

/// Every check, by name.
#[allow(dead_code)]
pub const ALL: &[(&str, fn())] = &[
    ("ttr_matches_seeded_rerun", ttr_matches_seeded_rerun),
    ("vocd_matches_grid_search_fit", vocd_matches_grid_search_fit),
    ("distsum_matches_double_loop", distsum_matches_double_loop),
    ("knn_distance_matches_brute_force", knn_distance_matches_brute_force),
    ("inertia_matches_recomputation_from_assignments", inertia_matches_recomputation_from_assignments),
    ("jacobi_oracle_sanity", jacobi_oracle_sanity),
    ("vendi_matches_jacobi_eigensolver", vendi_matches_jacobi_eigensolver),
    ("radius_matches_direct_formula", radius_matches_direct_formula),
    ("ldd_matches_gaussian_elimination", ldd_matches_gaussian_elimination),
    ("facility_location_matches_double_loop", facility_location_matches_double_loop),
    ("partition_entropy_matches_histogram", partition_entropy_matches_histogram),
    ("novelsum_matches_definition", novelsum_matches_definition),
    ("farthest_certificate", farthest_certificate),
    ("k_center_certificate", k_center_certificate),
    ("qdit_certificate", qdit_certificate),
    ("novel_select_certificate", novel_select_certificate),
];
