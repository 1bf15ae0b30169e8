//! Layered run configuration: built-in defaults, then a sectioned
//! `key = value` file, then `QTW_*` environment variables, then flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use qtw_core::backbones::{BackboneKind, ModelConfig};
use qtw_core::baseline::AdaptiveConfig;
use qtw_core::heads::HeadKind;
use qtw_core::model::Architecture;
use qtw_core::rng::mix64;
use qtw_core::sim::{scaled_tau_range, DatasetSpec};
use qtw_core::train::TrainRunConfig;

use crate::exit::ConfigError;

const SECTIONS: [&str; 3] = ["gen", "train", "baseline"];
/// Optional keys that are absent from the serialized defaults.
const OPTIONAL_KEYS: [(&str, &str); 1] = [("train", "grad_clip")];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub model: BackboneKind,
    pub head: HeadKind,
    pub hidden: usize,
    pub layers: usize,
    pub esn_scaling: f64,
    pub esn_seed: u64,
    #[serde(flatten)]
    pub run: TrainRunConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        TrainSection {
            model: m.kind,
            head: HeadKind::Kraus,
            hidden: m.hidden_dim,
            layers: m.layers,
            esn_scaling: m.esn_scaling,
            esn_seed: m.esn_seed,
            run: TrainRunConfig::default(),
        }
    }
}

impl TrainSection {
    pub fn architecture(&self) -> Architecture {
        let backbone = ModelConfig {
            kind: self.model,
            hidden_dim: self.hidden,
            layers: self.layers,
            esn_scaling: self.esn_scaling,
            esn_seed: self.esn_seed,
            ..ModelConfig::default()
        };
        Architecture { backbone, head: self.head }
    }
}

/// Fully resolved configuration of one invocation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Root seed; when set it replaces every per-section seed.
    pub seed: Option<u64>,
    pub workers: usize,
    pub gen: DatasetSpec,
    pub train: TrainSection,
    pub baseline: AdaptiveConfig,
}

/// Overrides collected from flags, keyed `section.key` (or a bare top-level key).
pub type Overrides = BTreeMap<String, Value>;

pub fn set(o: &mut Overrides, key: &str, value: impl Into<Value>) {
    o.insert(key.to_string(), value.into());
}

/// Parses a raw string the way it would be read from a config file; bare
/// words fall back to strings.
pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn defaults() -> Table {
    let d = Config { workers: 1, ..Config::default() };
    let mut t = Table::try_from(&d).expect("defaults serialize");
    // Worker count is skipped by the run config's serde, keep it top-level.
    t.insert("workers".into(), Value::Integer(1));
    t
}

fn known(defaults: &Table, section: Option<&str>, key: &str) -> bool {
    match section {
        None => key == "seed" || defaults.contains_key(key) && !SECTIONS.contains(&key),
        Some(s) => {
            defaults.get(s).and_then(Value::as_table).is_some_and(|t| t.contains_key(key))
                || OPTIONAL_KEYS.contains(&(s, key))
        }
    }
}

fn apply(base: &mut Table, defaults: &Table, dotted: &str, value: Value, origin: &str) -> Result<(), ConfigError> {
    let (section, key) = match dotted.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (None, dotted),
    };
    if !known(defaults, section, key) {
        return Err(ConfigError(format!("unknown setting `{dotted}` from {origin}")));
    }
    match section {
        None => base.insert(key.to_string(), value),
        Some(s) => base
            .entry(s.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("sections are tables")
            .insert(key.to_string(), value),
    };
    Ok(())
}

fn file_entries(table: Table, path: &Path) -> Result<Vec<(String, Value)>, ConfigError> {
    let mut out = Vec::new();
    for (k, v) in table {
        match v {
            Value::Table(inner) if SECTIONS.contains(&k.as_str()) => {
                out.extend(inner.into_iter().map(|(ik, iv)| (format!("{k}.{ik}"), iv)));
            }
            Value::Table(_) => return Err(ConfigError(format!("unknown section [{k}] in {}", path.display()))),
            v => out.push((k, v)),
        }
    }
    Ok(out)
}

/// `QTW_SEED`, `QTW_WORKERS` and `QTW_<SECTION>_<KEY>`.
fn env_entries(vars: impl Iterator<Item = (String, String)>) -> Vec<(String, Value)> {
    let mut out: Vec<(String, Value)> = vars
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix("QTW_")?.to_ascii_lowercase();
            let dotted = SECTIONS
                .iter()
                .find_map(|s| rest.strip_prefix(&format!("{s}_")).map(|key| format!("{s}.{key}")))
                .unwrap_or(rest);
            Some((dotted, parse_value(&v)))
        })
        .filter(|(k, _)| k != "bless")
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Resolves defaults < file < environment < flags.
pub fn resolve(
    file: Option<&Path>,
    vars: impl Iterator<Item = (String, String)>,
    flags: &Overrides,
) -> anyhow::Result<Config> {
    let defaults = defaults();
    let mut merged = defaults.clone();
    let mut layers: Vec<(String, Vec<(String, Value)>)> = Vec::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let table: Table = text.parse().map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        layers.push((path.display().to_string(), file_entries(table, path)?));
    }
    layers.push(("the environment".into(), env_entries(vars)));
    layers.push(("the command line".into(), flags.clone().into_iter().collect()));

    let mut tau_explicit = false;
    for (origin, entries) in layers {
        for (k, v) in entries {
            tau_explicit |= k == "gen.tau_range";
            apply(&mut merged, &defaults, &k, v, &origin)?;
        }
    }
    let mut cfg: Config = merged.try_into().map_err(|e| ConfigError(format!("{e}")))?;
    if !tau_explicit {
        cfg.gen.tau_range = scaled_tau_range(cfg.gen.steps);
    }
    if cfg.workers == 0 {
        return Err(ConfigError("workers must be at least 1".into()).into());
    }
    if let Some(seed) = cfg.seed {
        cfg.gen.base_seed_train = mix64(seed, 0);
        cfg.gen.base_seed_test = mix64(seed, 1);
        cfg.train.run.seed = seed;
    }
    cfg.train.run.workers = cfg.workers;
    cfg.gen.validate().map_err(anyhow::Error::from)?;
    cfg.train.run.validate().map_err(anyhow::Error::from)?;
    cfg.train.architecture().backbone.validate().map_err(anyhow::Error::from)?;
    Ok(cfg)
}
