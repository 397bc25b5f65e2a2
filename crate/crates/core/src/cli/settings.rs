use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Comma-separated flag value.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let items = s
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| {
                x.parse::<T>()
                    .map_err(|e| Error::invalid(format!("'{x}': {e}")))
            })
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(Error::invalid("empty list"));
        }
        Ok(List(items))
    }
}

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Config-file entries plus the resolved values of one invocation.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// `key=value` lines; blank lines and `#` comments are skipped. Keys are
    /// long flag names without the dashes.
    pub fn parse(text: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {}: expected key=value", no + 1))
            })?;
            let key = k.trim().trim_start_matches("--").replace('_', "-");
            if file.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::invalid(format!("config key '{key}' given twice")));
            }
        }
        Ok(Self {
            file,
            ..Self::default()
        })
    }

    /// Flag if given, else the config entry, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        self.used.insert(key.to_string());
        let value = match (flag, self.file.get(key)) {
            (Some(v), _) => v,
            (None, Some(raw)) => raw
                .parse::<T>()
                .map_err(|e| Error::invalid(format!("config key '{key}': {e}")))?,
            (None, None) => default,
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Adds a derived value to the metadata.
    pub fn record(&mut self, key: &str, value: impl fmt::Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    /// Fails on config keys the command never asked for.
    pub fn finish(&self) -> Result<()> {
        match self.file.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(Error::invalid(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn metadata(&self, command: &str) -> String {
        let mut out = format!(
            "command={command}\nversion={}\nschema_version={}\n",
            env!("CARGO_PKG_VERSION"),
            super::SCHEMA_VERSION
        );
        for (k, v) in &self.resolved {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}
