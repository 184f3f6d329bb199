//! Key-value config files: keys are long flag names without the dashes,
//! one `key = value` per line, `#` comments. Flags given on the command
//! line override file values.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::errors::{usage, CliError};

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    i + 1
                ))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { map })
    }

    /// Flag value if given, else the parsed config value under `key`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| usage(format!("config key `{key}`: {e}"))),
        }
    }

    /// Boolean switch: true when the flag was passed or the config says so.
    pub fn resolve_switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        Ok(self.resolve::<bool>(None, key)?.unwrap_or(false))
    }

    /// Comma-separated list, from the flag when given, else the config.
    pub fn resolve_list<T: FromStr>(
        &self,
        flag: Option<&str>,
        key: &str,
    ) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: Display,
    {
        let raw = match flag {
            Some(s) => Some(s.to_string()),
            None => self.map.get(key).cloned(),
        };
        let Some(raw) = raw else { return Ok(None) };
        raw.split(',')
            .map(|item| {
                item.trim()
                    .parse()
                    .map_err(|e| usage(format!("`{key}` entry `{}`: {e}", item.trim())))
            })
            .collect::<Result<Vec<T>, CliError>>()
            .map(Some)
    }
}
