pub mod correlate;
pub mod score;
pub mod select;
pub mod simulate;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use novelsum_core::{DistanceKind, NovelSumConfig};
use serde::Serialize;

use crate::args::NovelArgs;
use crate::config::ConfigFile;
use crate::error::CliError;

pub fn novel_config(
    args: &NovelArgs,
    distance: Option<DistanceKind>,
    cfg: &ConfigFile,
) -> Result<NovelSumConfig, CliError> {
    let d = NovelSumConfig::default();
    let config = NovelSumConfig {
        alpha: cfg.resolve_or(args.alpha, "alpha", d.alpha)?,
        beta: cfg.resolve_or(args.beta, "beta", d.beta)?,
        k: cfg.resolve_or(args.k, "k", d.k)?,
        distance: cfg.resolve_or(distance, "distance", d.distance)?,
        epsilon: cfg.resolve_or(args.epsilon, "epsilon", d.epsilon)?,
        normalization: cfg.resolve_or(args.normalization, "normalization", d.normalization)?,
    };
    config.validate()?;
    Ok(config)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum IndexFile {
    List(Vec<usize>),
    Selection { indices: Vec<usize> },
}

/// A JSON index array, or any object with an `indices` array such as a selection result.
pub fn read_indices(path: &Path) -> Result<Vec<usize>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let parsed: IndexFile = serde_json::from_str(&text)
        .map_err(|_| CliError::input(format!("{}: expected a JSON index array or an object with \"indices\"", path.display())))?;
    Ok(match parsed {
        IndexFile::List(v) | IndexFile::Selection { indices: v } => v,
    })
}
