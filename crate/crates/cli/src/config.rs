//! Layered run configuration and manifests.
//!
//! A resolved configuration is built from the subcommand's defaults, then the
//! `--config` file, then each `--set key=value` in order. Dotted keys address
//! nested tables (`dataset.noise_high=0.8`). Unknown keys are rejected by the
//! target type.
//!
//! A manifest written next to every output can itself be passed as
//! `--config`; it carries the seed and the fully resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

/// Seed used when neither the flag, the config file nor an override sets one.
pub const DEFAULT_SEED: u64 = 7;

const SEED_KEY: &str = "seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest<T> {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub config: T,
}

impl<T: Serialize> Manifest<T> {
    pub fn new(subcommand: &str, seed: u64, config: T) -> Self {
        Self { subcommand: subcommand.to_string(), version: env!("CARGO_PKG_VERSION").to_string(), seed, config }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| CliError::Usage(format!("cannot serialize manifest: {e}")))?;
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

/// `<out>.<suffix>`, keeping the full output file name.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

/// Resolves the configuration of `subcommand` and its seed.
pub fn resolve<T>(subcommand: &str, file: Option<&Path>, sets: &[String], seed_flag: Option<u64>) -> Result<(T, u64)>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut table = match Value::try_from(T::default()) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("configurations serialize to tables"),
    };
    let mut seed = None;

    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut loaded: Table =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if let Some(kind) = loaded.remove("subcommand") {
            if kind.as_str() != Some(subcommand) {
                return Err(CliError::Usage(format!(
                    "{} is a manifest for `{kind}`, not `{subcommand}`",
                    path.display()
                )));
            }
            loaded.remove("version");
            seed = take_seed(&mut loaded)?;
            loaded = match loaded.remove("config") {
                Some(Value::Table(t)) => t,
                _ => return Err(CliError::Usage(format!("{}: manifest has no [config] table", path.display()))),
            };
        } else {
            seed = take_seed(&mut loaded)?;
        }
        merge(&mut table, loaded);
    }

    for set in sets {
        let (key, raw) =
            set.split_once('=').ok_or_else(|| CliError::Usage(format!("expected key=value, got `{set}`")))?;
        let value = parse_value(raw.trim());
        if key.trim() == SEED_KEY {
            seed = Some(seed_from(&value)?);
        } else {
            assign(&mut table, key.trim(), value)?;
        }
    }

    let config = T::deserialize(Value::Table(table))
        .map_err(|e| CliError::Usage(format!("invalid {subcommand} config: {}", e.to_string().trim_end())))?;
    Ok((config, seed_flag.or(seed).unwrap_or(DEFAULT_SEED)))
}

fn take_seed(table: &mut Table) -> Result<Option<u64>> {
    table.remove(SEED_KEY).map(|v| seed_from(&v)).transpose()
}

fn seed_from(value: &Value) -> Result<u64> {
    value
        .as_integer()
        .and_then(|v| u64::try_from(v).ok())
        .ok_or_else(|| CliError::Usage(format!("seed must be a non-negative integer, got {value}")))
}

/// A TOML literal, or the raw text as a string when it is not one.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn assign(table: &mut Table, key: &str, value: Value) -> Result<()> {
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
            Ok(())
        }
        Some((head, rest)) => match table.entry(head.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(inner) => assign(inner, rest, value),
            _ => Err(CliError::Usage(format!("`{head}` is not a table"))),
        },
    }
}
