use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use hgrl_core::env::EnvConfig;
use hgrl_rl::config::{NetConfig, TrainConfig};

/// Prefix of environment variables that override config keys. Nested keys
/// are joined with `__`: `HGRL_ENV__THRESHOLDS__X=40` sets `env.thresholds.x`.
pub const ENV_PREFIX: &str = "HGRL_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Seeds of multi-seed experiments.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    pub env: EnvConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            seeds: vec![7, 11, 23, 42, 101],
            out_dir: PathBuf::from("runs"),
            eval_episodes: 10,
            env: EnvConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate().context("env")?;
        self.net.validate().context("net")?;
        self.train.validate().context("train")?;
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Ablation switches accepted by `--toggle` without their section prefix.
fn toggle_path(key: &str) -> &str {
    match key {
        "graph_mode" => "env.graph_mode",
        "network_kind" => "net.network_kind",
        "head_agg" => "net.head_agg",
        other => other,
    }
}

/// Interprets `raw` as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("malformed key {path:?}");
    }
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for k in parents {
        let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| anyhow!("{path}: {k} is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// `key=value` with `key` a dotted path or one of the ablation toggles.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| anyhow!("override {spec:?} is not key=value"))?;
    set_path(table, toggle_path(key.trim()), parse_value(raw.trim()))
}

pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<String> {
    let mut out: Vec<String> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let key = k.strip_prefix(ENV_PREFIX)?;
            Some(format!("{}={v}", key.to_lowercase().replace("__", ".")))
        })
        .collect();
    out.sort();
    out
}

/// Parses `text`, then applies environment overrides and toggles in order.
pub fn parse_config(text: &str, env: &[String], toggles: &[String]) -> Result<RunConfig> {
    // Parsing the text directly keeps line/column context in error messages.
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
    if !env.is_empty() || !toggles.is_empty() {
        let mut table: Table = text.parse().map_err(|e| anyhow!("{e}"))?;
        for o in env.iter().chain(toggles) {
            apply_override(&mut table, o)?;
        }
        cfg = Value::Table(table).try_into().map_err(|e| anyhow!("after overrides: {e}"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads a config file (or defaults when `path` is `None`) with `HGRL_*`
/// variables from the process environment and command-line toggles applied.
pub fn load_config(path: Option<&Path>, toggles: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let env = env_overrides(std::env::vars());
    let what = path.map_or("defaults".to_string(), |p| p.display().to_string());
    parse_config(&text, &env, toggles).with_context(|| format!("config {what}"))
}
