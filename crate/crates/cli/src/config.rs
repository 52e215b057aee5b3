//! Flat `key = value` configuration files. Precedence: flag, then file, then default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Every key a config file may set. Keys use underscores; dashes are accepted.
pub const KNOWN_KEYS: &[&str] = &[
    "threads",
    "seed",
    "distance",
    "alpha",
    "beta",
    "k",
    "epsilon",
    "normalization",
    "inertia_clusters",
    "entropy_clusters",
    "vendi_alpha",
    "knn_k",
    "ttr_sample_len",
    "vocd_lengths",
    "vocd_subsamples",
    "kmeans_max_iters",
    "budget",
    "threshold",
    "clusters",
    "unique",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Blank lines and `#` comments are skipped. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("config line {}: expected key = value", n + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::input(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::input(format!("config line {}: duplicate key {key:?}", n + 1)));
            }
        }
        Ok(Self { values })
    }

    /// Flag value if given, else the parsed file value, else `None`.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key} missing from KNOWN_KEYS");
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::input(format!("config key {key}: invalid value {v:?}: {e}"))),
        }
    }

    pub fn resolve_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.resolve(flag, key)?.unwrap_or(default))
    }
}

/// Comma-separated list such as `10,20,30`.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<usize>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}
