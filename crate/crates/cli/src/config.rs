//! Flat key-value configuration with one section per command.
//!
//! ```text
//! [fit]
//! input = data.csv
//! method = debiased
//! r = auto
//! ```
//!
//! Command-line flags override file values; the fully resolved map is echoed
//! into every report so a run can be reproduced from its own output.

use std::collections::BTreeMap;
use std::path::Path;

use maxeffect::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl FlatConfig {
    pub fn load(path: &Path) -> Result<FlatConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        FlatConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<FlatConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = "common".to_string();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("config line {} is not key = value: '{raw}'", lineno + 1))
            })?;
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FlatConfig { sections })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .or_else(|| self.sections.get("common").and_then(|s| s.get(key)))
            .map(String::as_str)
    }
}

/// Final resolved settings for one command, built from defaults, then the
/// config file, then flags. Serialized into reports for reproducibility.
#[derive(Debug, Clone, Default)]
pub struct Resolved {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl Resolved {
    pub fn new(command: &str) -> Resolved {
        Resolved {
            command: command.to_string(),
            values: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn set_opt(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::config(format!("missing required setting '{key}'")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::config(format!("setting '{key}' has invalid value '{raw}'"))
            }),
        }
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    #[cfg(test)]
    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Settings echoed into reports: everything that determines the result.
    /// The worker count is an execution detail (results are invariant to
    /// it) and stays out so runs at different widths emit identical bytes.
    pub fn echo_map(&self) -> BTreeMap<String, String> {
        let mut map = self.values.clone();
        map.remove("workers");
        map
    }

    /// Flat rendering of the echoed settings (see [`Resolved::echo_map`]).
    pub fn echo_flat_text(&self) -> String {
        let mut out = format!("[{}]\n", self.command);
        for (k, v) in self.echo_map() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// Confidence levels come in as a comma list.
pub fn parse_confidence_list(raw: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v: f64 = part
            .parse()
            .map_err(|_| Error::config(format!("bad confidence level '{part}'")))?;
        if !(0.0 < v && v < 1.0) {
            return Err(Error::config(format!(
                "confidence level {v} must lie in (0, 1)"
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::config("no confidence levels given"));
    }
    Ok(out)
}
