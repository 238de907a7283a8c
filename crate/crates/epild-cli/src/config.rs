//! Flat key-value config files with `[section]` headers.
//!
//! ```text
//! # comment
//! [simulate]
//! n = 400
//! t = 5.0
//! ```
//!
//! Lookup is by (section, key); values are plain strings parsed on demand.
//! Command-line flags take precedence over config entries, which take
//! precedence over built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// A command-line usage problem (missing or inconsistent settings), reported
/// with exit code 2 rather than 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Default, Clone)]
pub struct Config {
    entries: BTreeMap<(String, String), String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::from("global");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{raw}`", lineno + 1);
            };
            entries.insert(
                (section.clone(), key.trim().to_string()),
                value.trim().to_string(),
            );
        }
        Ok(Config { entries })
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|s| s.as_str())
    }

    /// Typed lookup in `[section]`, falling back to `[global]`.
    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(section, key).or_else(|| self.raw("global", key));
        match raw {
            None => Ok(None),
            Some(s) => match s.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config [{section}] {key} = `{s}`: {e}"),
            },
        }
    }
}

/// Resolve one setting: explicit flag, then config, then default.
pub fn resolve<T: FromStr + Clone>(
    flag: &Option<T>,
    cfg: &Config,
    section: &str,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    if let Some(v) = cfg.get::<T>(section, key)? {
        return Ok(v);
    }
    Ok(default)
}

/// As `resolve` but the setting is mandatory.
pub fn resolve_required<T: FromStr + Clone>(
    flag: &Option<T>,
    cfg: &Config,
    section: &str,
    key: &str,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    if let Some(v) = cfg.get::<T>(section, key)? {
        return Ok(v);
    }
    Err(UsageError(format!(
        "missing required setting `{key}` (flag --{key} or config [{section}] {key})"
    ))
    .into())
}

/// Seed resolution: flag, config, `EPILD_SEED` environment variable, then 0.
pub fn resolve_seed(flag: Option<u64>, cfg: &Config, section: &str) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = cfg.get::<u64>(section, "seed")? {
        return Ok(s);
    }
    if let Ok(env) = std::env::var("EPILD_SEED") {
        let s = env
            .parse::<u64>()
            .with_context(|| format!("EPILD_SEED=`{env}` is not a valid seed"))?;
        return Ok(s);
    }
    Ok(0)
}
