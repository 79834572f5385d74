//! Flag/file resolution: every command accepts `--config <path.json>` whose
//! keys fill in flags that were not given on the command line; flags win.
//! Each run echoes the fully resolved configuration (inside the JSON report,
//! or on stderr for CSV/text output) so any reported number can be
//! reproduced from its own output.

use crate::CliError;
use serde_json::{Map, Value};
use std::path::Path;

pub struct Resolver {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Resolver {
    pub fn new(config_path: Option<&Path>) -> Result<Self, CliError> {
        let file = match config_path {
            None => Map::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                let value: Value = serde_json::from_str(&text).map_err(|e| {
                    CliError::usage(format!("config {} is not valid JSON: {e}", path.display()))
                })?;
                match value {
                    Value::Object(map) => map,
                    _ => {
                        return Err(CliError::usage(format!(
                            "config {} must be a JSON object",
                            path.display()
                        )))
                    }
                }
            }
        };
        Ok(Self {
            file,
            resolved: Map::new(),
        })
    }

    fn record(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.to_string(), value);
    }

    /// Finalized configuration, echoed into every report.
    pub fn resolved(&self) -> Value {
        Value::Object(self.resolved.clone())
    }

    fn file_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| CliError::usage(format!("config key `{key}` must be a number"))),
        }
    }

    fn file_str(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(CliError::usage(format!(
                "config key `{key}` must be a string"
            ))),
        }
    }

    pub fn f64(&mut self, flag: Option<f64>, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match flag {
            Some(v) => v,
            None => self.file_f64(key)?.unwrap_or(default),
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn require_f64(&mut self, flag: Option<f64>, key: &str) -> Result<f64, CliError> {
        let v = match flag {
            Some(v) => v,
            None => self
                .file_f64(key)?
                .ok_or_else(|| CliError::usage(format!("missing required parameter `{key}`")))?,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn u64(&mut self, flag: Option<u64>, key: &str, default: u64) -> Result<u64, CliError> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                None => default,
                Some(value) => value.as_u64().ok_or_else(|| {
                    CliError::usage(format!("config key `{key}` must be a nonnegative integer"))
                })?,
            },
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn string(
        &mut self,
        flag: Option<&str>,
        key: &str,
        default: &str,
    ) -> Result<String, CliError> {
        let v = match flag {
            Some(v) => v.to_string(),
            None => self.file_str(key)?.unwrap_or_else(|| default.to_string()),
        };
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    pub fn flag(&mut self, set: bool, key: &str) -> Result<bool, CliError> {
        let v = if set {
            true
        } else {
            match self.file.get(key) {
                None => false,
                Some(Value::Bool(b)) => *b,
                Some(_) => {
                    return Err(CliError::usage(format!(
                        "config key `{key}` must be a boolean"
                    )))
                }
            }
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    /// Multi-coordinate blocks (`coords`, `x`, `fns`) straight from the
    /// config file; too structured for flags.
    pub fn multi_block(&mut self) -> Result<Option<MultiBlock>, CliError> {
        let Some(coords) = self.file.get("coords") else {
            return Ok(None);
        };
        let coords = coords
            .as_array()
            .ok_or_else(|| CliError::usage("config key `coords` must be an array".to_string()))?
            .iter()
            .map(|c| {
                let get = |k: &str| {
                    c.get(k).and_then(Value::as_f64).ok_or_else(|| {
                        CliError::usage(format!("each coords entry needs numeric `{k}`"))
                    })
                };
                Ok((get("alpha")?, get("beta")?, get("b")?))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let x = self
            .file
            .get("x")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::usage("multi config needs an `x` array".to_string()))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| CliError::usage("`x` entries must be numbers".to_string()))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let fns = self
            .file
            .get("fns")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::usage("multi config needs a `fns` array".to_string()))?
            .iter()
            .map(|v| {
                v.as_str().map(str::to_string).ok_or_else(|| {
                    CliError::usage("`fns` entries must be strings".to_string())
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        self.record("coords", self.file.get("coords").cloned().unwrap());
        self.record("x", self.file.get("x").cloned().unwrap());
        self.record("fns", self.file.get("fns").cloned().unwrap());
        Ok(Some(MultiBlock { coords, x, fns }))
    }
}

pub struct MultiBlock {
    pub coords: Vec<(f64, f64, f64)>,
    pub x: Vec<f64>,
    pub fns: Vec<String>,
}
