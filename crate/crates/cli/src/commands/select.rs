use novelsum_core::io::{load_embeddings, save_embeddings};
use novelsum_core::selection::{SelectionError, SelectionResult};
use novelsum_core::{EmbeddingMatrix, SelectionConfig};

use super::{novel_config, write_json};
use crate::args::SelectArgs;
use crate::config::ConfigFile;
use crate::error::CliError;

fn selection_config(args: &SelectArgs, cfg: &ConfigFile) -> Result<SelectionConfig, CliError> {
    let d = SelectionConfig::default();
    Ok(SelectionConfig {
        budget: cfg.resolve_or(args.budget, "budget", d.budget)?,
        seed: cfg.resolve_or(args.seed, "seed", d.seed)?,
        distance: cfg.resolve_or(args.distance, "distance", d.distance)?,
        repr_threshold: cfg.resolve_or(args.threshold, "threshold", d.repr_threshold)?,
        kmeans_clusters: cfg.resolve_or(args.clusters, "clusters", d.kmeans_clusters)?,
        kmeans_max_iters: cfg.resolve_or(args.kmeans_max_iters, "kmeans_max_iters", d.kmeans_max_iters)?,
        duplicate_unique: cfg.resolve(args.unique, "unique")?,
        novel: novel_config(&args.novel, args.distance, cfg)?,
    })
}

fn emit(args: &SelectArgs, pool: &EmbeddingMatrix, result: &SelectionResult) -> Result<(), CliError> {
    write_json(&args.out, result)?;
    println!("{}", args.out.display());
    if let Some(path) = &args.emit_subset {
        save_embeddings(&pool.select(&result.indices)?, path)?;
        println!("{}", path.display());
    }
    Ok(())
}

pub fn run(args: &SelectArgs, cfg: &ConfigFile) -> Result<(), CliError> {
    let config = selection_config(args, cfg)?;
    let pool = load_embeddings(&args.pool)?;
    let reference = args.reference.as_ref().map(load_embeddings).transpose()?;
    match args.strategy.run(&pool, reference.as_ref(), &config) {
        Ok(result) => emit(args, &pool, &result),
        Err(SelectionError::ThresholdExhausted { budget, partial }) => {
            emit(args, &pool, &partial)?;
            Err(CliError::Exhausted(format!(
                "threshold exhausted the pool after {} of {budget} picks; partial result written",
                partial.indices.len()
            )))
        }
        Err(e) => Err(e.into()),
    }
}
