use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::output::CliError;

pub const SEED_ENV: &str = "ARQG_SEED";

/// Values from `--config`, consulted for any flag left unset.
#[derive(Default)]
pub struct FileConfig {
    values: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(values)) => Ok(Self { values }),
            Ok(_) => Err(CliError::Param(format!("{}: config must be a JSON object", path.display()))),
            Err(e) => Err(CliError::Param(format!("{}: {e}", path.display()))),
        }
    }

    /// The flag if given, else the config entry (keys use the flag's
    /// spelling, with `-` or `_`).
    pub fn pick<T: DeserializeOwned>(&self, name: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        let entry = self
            .values
            .get(name)
            .or_else(|| self.values.get(&name.replace('-', "_")));
        match entry {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::Param(format!("config entry `{name}`: {e}"))),
        }
    }

    pub fn require<T: DeserializeOwned>(&self, name: &str, flag: Option<T>) -> Result<T, CliError> {
        self.pick(name, flag)?
            .ok_or_else(|| CliError::Param(format!("missing required --{name}")))
    }

    pub fn or<T: DeserializeOwned>(&self, name: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        Ok(self.pick(name, flag)?.unwrap_or(default))
    }

    /// Flag, then config, then `$ARQG_SEED`, then 0.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(s) = self.pick("seed", flag)? {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Param(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }
}
