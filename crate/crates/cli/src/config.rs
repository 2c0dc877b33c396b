//! Flat sectioned key-value configuration with strict validation: unknown
//! sections or keys are rejected, command-line flags override file values,
//! and the fully resolved map is what the run manifest records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use causal_hr::{Error, Result};

/// Parsed `[section] key = value` text, sorted for reproducible manifests.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidInput(format!(
                    "config line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            let section = current.clone().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "config line {}: key before any [section]",
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let entry = sections.entry(section).or_default();
            if entry.insert(key.clone(), value).is_some() {
                return Err(Error::InvalidInput(format!(
                    "config line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(Self { sections })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn set(&mut self, section: &str, key: &str, value: String) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value);
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(String::as_str)
    }

    fn parse_value<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidInput(format!("config {section}.{key}: cannot parse '{v}'"))
            }),
        }
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.parse_value(section, key)
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.parse_value(section, key)
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.parse_value(section, key)
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.get(section, key) {
            None => Ok(None),
            Some("true") | Some("1") | Some("yes") => Ok(Some(true)),
            Some("false") | Some("0") | Some("no") => Ok(Some(false)),
            Some(v) => Err(Error::InvalidInput(format!(
                "config {section}.{key}: expected a boolean, got '{v}'"
            ))),
        }
    }

    /// Reject any section/key outside the allowed schema.
    pub fn check_schema(&self, allowed: &[(&str, &[&str])]) -> Result<()> {
        for (section, keys) in &self.sections {
            let Some((_, allowed_keys)) = allowed.iter().find(|(s, _)| s == section) else {
                return Err(Error::InvalidInput(format!(
                    "unknown config section [{section}]"
                )));
            };
            for key in keys.keys() {
                if !allowed_keys.contains(&key.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "unknown config key {section}.{key}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical `section.key = value` rendering, sorted, for the manifest.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (section, keys) in &self.sections {
            for (key, value) in keys {
                let _ = writeln!(out, "{section}.{key} = {value}");
            }
        }
        out
    }

    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        for (section, keys) in &self.sections {
            for (key, value) in keys {
                map.insert(format!("{section}.{key}"), value.clone());
            }
        }
        map
    }
}
