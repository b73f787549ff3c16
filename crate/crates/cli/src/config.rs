//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "grammar",
    "corpus",
    "model",
    "gold",
    "map",
    "seed",
    "workers",
    "segment_size",
    "passes",
    "bootstrap",
    "heldout_fraction",
    "fit_lambda",
    "epsilon",
    "drop_threshold",
    "bucket_bounds",
    "lambda",
    "discount",
    "lexical_backoff",
    "open_lexicon",
    "mix",
    "min_freq",
    "cat",
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Lines are `key = value`; blank lines and `#` comments are skipped.
    /// Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(CliError::Usage(format!("config line {}: unknown key `{k}`", i + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    /// A comma-separated list of exactly `N` numbers.
    pub fn get_array<const N: usize>(&self, key: &str) -> Result<Option<[f64; N]>, CliError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let parsed: Result<Vec<f64>, _> = v.split(',').map(|x| x.trim().parse::<f64>()).collect();
        match parsed {
            Ok(xs) if xs.len() == N => Ok(Some(xs.try_into().unwrap())),
            _ => Err(CliError::Usage(format!("config key `{key}` needs {N} comma-separated numbers"))),
        }
    }
}
