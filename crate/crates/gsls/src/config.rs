//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names without the leading dashes (`grid-n = 10`).
//! Lines starting with `#` are comments. A key may repeat when the matching
//! flag does (`fixed = 1,1,1`). Command-line flags override file values.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub origin: Option<PathBuf>,
    values: BTreeMap<String, Vec<String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                CliError::Usage(format!("config file {} not found", path.display()))
            }
            _ => CliError::io(path, e),
        })?;
        let mut cfg = Self::parse(&text)
            .map_err(|msg| CliError::Usage(format!("{}: {msg}", path.display())))?;
        cfg.origin = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'key = value'", i + 1))?;
            let key = key.trim().trim_start_matches("--");
            if key.is_empty() {
                return Err(format!("line {}: empty key", i + 1));
            }
            values
                .entry(key.to_string())
                .or_default()
                .push(value.trim().to_string());
        }
        Ok(ConfigFile {
            origin: None,
            values,
        })
    }

    /// Rejects keys outside `known`, so typos do not pass silently.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(CliError::Usage(format!(
                "unknown config key '{k}' (known: {})",
                known.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key).map(Vec::as_slice) {
            None | Some([]) => Ok(None),
            Some([v]) => parse_value(key, v).map(Some),
            Some(_) => Err(CliError::Usage(format!(
                "config key '{key}' given more than once"
            ))),
        }
    }

    pub fn get_all<T>(&self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .into_iter()
            .flatten()
            .map(|v| parse_value(key, v))
            .collect()
    }

    pub fn switch(&self, key: &str) -> Result<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    /// Flag value if given, else the file value.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Repeated flag values if any were given, else the file values.
    pub fn pick_all<T>(&self, flag: Vec<T>, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_empty() {
            self.get_all(key)
        } else {
            Ok(flag)
        }
    }

    pub fn pick_switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.switch(key)?)
    }
}

fn parse_value<T>(key: &str, v: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    v.parse()
        .map_err(|e| CliError::Usage(format!("config key '{key}': invalid value '{v}': {e}")))
}
