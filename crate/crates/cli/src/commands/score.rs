use std::path::PathBuf;
use std::time::Instant;

use novelsum_core::io::{load_corpus, load_embeddings};
use novelsum_core::metrics::{
    cluster_inertia, dist_sum, facility_location, knn_distance, ldd, partition_entropy, partition_entropy_by_nearest,
    radius, ttr, vendi_score, vocd_d,
};
use novelsum_core::novelsum::novelsum;
use novelsum_core::{EmbeddingMatrix, MetricConfig, MetricReport};
use serde::Serialize;

use super::{novel_config, read_indices, write_json};
use crate::args::{MetricName, ScoreArgs};
use crate::config::ConfigFile;
use crate::error::CliError;

#[derive(Debug, Serialize)]
struct ScoreOutput {
    #[serde(flatten)]
    report: MetricReport,
    duration_ms: u64,
}

fn metric_config(args: &ScoreArgs, cfg: &ConfigFile) -> Result<MetricConfig, CliError> {
    let d = MetricConfig::default();
    let distance = match args.metric {
        MetricName::DistSum(Some(kind)) => kind,
        _ => cfg.resolve_or(args.distance, "distance", d.distance)?,
    };
    let config = MetricConfig {
        distance,
        inertia_clusters: cfg.resolve_or(args.inertia_clusters, "inertia_clusters", d.inertia_clusters)?,
        entropy_clusters: cfg.resolve_or(args.entropy_clusters, "entropy_clusters", d.entropy_clusters)?,
        vendi_alpha: cfg.resolve_or(args.vendi_alpha, "vendi_alpha", d.vendi_alpha)?,
        knn_k: cfg.resolve_or(args.knn_k, "knn_k", d.knn_k)?,
        ttr_sample_len: cfg.resolve_or(args.ttr_sample_len, "ttr_sample_len", d.ttr_sample_len)?,
        vocd_lengths: cfg
            .resolve(args.vocd_lengths.clone(), "vocd_lengths")?
            .map_or(d.vocd_lengths, |l| l.0),
        vocd_subsamples: cfg.resolve_or(args.vocd_subsamples, "vocd_subsamples", d.vocd_subsamples)?,
        kmeans_max_iters: cfg.resolve_or(args.kmeans_max_iters, "kmeans_max_iters", d.kmeans_max_iters)?,
        seed: cfg.resolve_or(args.seed, "seed", d.seed)?,
    };
    config.validate()?;
    Ok(config)
}

fn load(path: &Option<PathBuf>, flag: &str, metric: MetricName) -> Result<EmbeddingMatrix, CliError> {
    let path = path
        .as_ref()
        .ok_or_else(|| CliError::input(format!("metric {metric} needs --{flag}")))?;
    Ok(load_embeddings(path)?)
}

pub fn run(args: &ScoreArgs, cfg: &ConfigFile) -> Result<(), CliError> {
    let config = metric_config(args, cfg)?;
    let metric = args.metric;
    let corpus = match (&args.corpus, metric.needs_corpus()) {
        (Some(p), true) => Some(load_corpus(p)?),
        (None, true) => return Err(CliError::input(format!("metric {metric} needs --corpus"))),
        (_, false) => None,
    };
    let embeddings = if metric.needs_corpus() {
        None
    } else {
        Some(load(&args.embeddings, "embeddings", metric)?)
    };
    let reference = match metric {
        MetricName::FacilityLocation | MetricName::PartitionEntropy => {
            Some(load(&args.reference, "reference", metric)?)
        }
        MetricName::NovelSum => args.reference.as_ref().map(load_embeddings).transpose()?,
        _ => None,
    };
    let selection = match (&args.selection, metric) {
        (Some(p), MetricName::PartitionEntropy) => Some(read_indices(p)?),
        (Some(_), _) => return Err(CliError::input("--selection only applies to partition_entropy")),
        (None, _) => None,
    };

    let start = Instant::now();
    let emb = || embeddings.as_ref().expect("loaded for embedding metrics");
    let refm = || reference.as_ref().expect("loaded for pool metrics");
    let report = match metric {
        MetricName::Ttr => ttr(corpus.as_ref().expect("corpus loaded"), &config)?,
        MetricName::VocdD => vocd_d(corpus.as_ref().expect("corpus loaded"), &config)?,
        MetricName::DistSum(_) => dist_sum(emb(), &config)?,
        MetricName::KnnDistance => knn_distance(emb(), &config)?,
        MetricName::ClusterInertia => cluster_inertia(emb(), &config)?,
        MetricName::Vendi => vendi_score(emb(), &config)?,
        MetricName::Radius => radius(emb(), &config)?,
        MetricName::Ldd => ldd(emb(), &config)?,
        MetricName::FacilityLocation => facility_location(emb(), refm(), &config)?,
        MetricName::PartitionEntropy => match &selection {
            Some(indices) => partition_entropy(indices, refm(), &config)?,
            None => partition_entropy_by_nearest(emb(), refm(), &config)?,
        },
        MetricName::NovelSum => {
            let novel = novel_config(&args.novel, args.distance, cfg)?;
            match &reference {
                Some(r) => novelsum(emb(), r, &novel)?.0,
                None => novelsum(emb(), emb(), &novel)?
                    .0
                    .with_note("no --reference given: density factors estimated against the dataset itself"),
            }
        }
    };
    let out = ScoreOutput {
        report,
        duration_ms: u64::try_from(start.elapsed().as_millis()).unwrap_or(u64::MAX),
    };
    write_json(&args.out, &out)?;
    println!("{}", args.out.display());
    Ok(())
}
