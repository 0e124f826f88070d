use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentKind {
    NoetherResidual,
    Table2,
    Conservation,
    ModifiedEq,
    BnEffectiveLr,
    RmspropEquiv,
    SteadyState,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Table2,
        ExperimentKind::NoetherResidual,
        ExperimentKind::Conservation,
        ExperimentKind::ModifiedEq,
        ExperimentKind::BnEffectiveLr,
        ExperimentKind::SteadyState,
        ExperimentKind::RmspropEquiv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::NoetherResidual => "noether-residual",
            ExperimentKind::Table2 => "table2",
            ExperimentKind::Conservation => "conservation",
            ExperimentKind::ModifiedEq => "modified-eq",
            ExperimentKind::BnEffectiveLr => "bn-effective-lr",
            ExperimentKind::RmspropEquiv => "rmsprop-equiv",
            ExperimentKind::SteadyState => "steady-state",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

/// A flat key-value configuration value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig { kind, params: BTreeMap::new(), seed: 0, out: out.into() }
    }

    /// Parses a flat TOML file. Nested tables and arrays are rejected.
    pub fn from_toml_str(kind: ExperimentKind, text: &str, out: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| HarnessError::Config(format!("config is not valid TOML: {e}")))?;
        let mut cfg = ExperimentConfig::new(kind, out);
        for (key, value) in table {
            if key == "seed" {
                cfg.seed = match value {
                    toml::Value::Integer(i) if i >= 0 => i as u64,
                    _ => return Err(HarnessError::Config("seed must be a non-negative integer".into())),
                };
                continue;
            }
            let v = match value {
                toml::Value::Integer(i) => Value::Number(i as f64),
                toml::Value::Float(x) => Value::Number(x),
                toml::Value::String(s) => Value::Text(s),
                toml::Value::Boolean(b) => Value::Number(if b { 1.0 } else { 0.0 }),
                other => {
                    return Err(HarnessError::Config(format!(
                        "key '{key}' has unsupported type {}",
                        other.type_str()
                    )))
                }
            };
            cfg.params.insert(key, v);
        }
        Ok(cfg)
    }

    pub fn from_file(kind: ExperimentKind, path: &Path, out: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(kind, &text, out)
    }

    pub fn set(&mut self, key: &str, value: f64) -> &mut Self {
        self.params.insert(key.to_string(), Value::Number(value));
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.set(key, value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// A required numeric parameter.
    pub fn require(&self, key: &str) -> Result<f64, HarnessError> {
        match self.params.get(key) {
            Some(Value::Number(x)) if x.is_finite() => Ok(*x),
            Some(other) => Err(HarnessError::Config(format!("'{key}' must be a finite number, got '{other}'"))),
            None => Err(HarnessError::Config(format!("{} needs parameter '{key}'", self.kind))),
        }
    }

    pub fn get_or(&self, key: &str, default: f64) -> Result<f64, HarnessError> {
        if self.params.contains_key(key) {
            self.require(key)
        } else {
            Ok(default)
        }
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize, HarnessError> {
        let x = self.get_or(key, default as f64)?;
        if x < 0.0 || x.fract() != 0.0 {
            return Err(HarnessError::Config(format!("'{key}' must be a non-negative integer")));
        }
        Ok(x as usize)
    }

    pub fn require_count(&self, key: &str) -> Result<usize, HarnessError> {
        self.require(key)?;
        self.count_or(key, 0)
    }

    /// Directory this run writes into.
    pub fn run_dir(&self) -> PathBuf {
        self.out.join(self.kind.name())
    }

    /// Echo as a TOML table.
    pub fn to_toml(&self) -> toml::Table {
        let mut t = toml::Table::new();
        t.insert("experiment".into(), toml::Value::String(self.kind.name().into()));
        let seed = i64::try_from(self.seed).map_or_else(|_| toml::Value::String(self.seed.to_string()), toml::Value::Integer);
        t.insert("seed".into(), seed);
        t.insert("out".into(), toml::Value::String(self.out.display().to_string()));
        for (k, v) in &self.params {
            let v = match v {
                Value::Number(x) => toml::Value::Float(*x),
                Value::Text(s) => toml::Value::String(s.clone()),
            };
            t.insert(k.clone(), v);
        }
        t
    }
}
