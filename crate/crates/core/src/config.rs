//! Flat key=value configuration with `[section]` headers.
//!
//! The format is deliberately minimal: one `key = value` pair per line,
//! `#` starts a comment, section headers group keys. Later assignments
//! override earlier ones, which makes layering (preset defaults, config
//! file, command-line flags) a plain sequence of `set` calls.

use crate::error::{Error, Result};

/// Ordered section/key/value store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    /// (section, key, value) in insertion order; lookups scan from the back
    /// so the most recent assignment wins.
    entries: Vec<(String, String, String)>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse config text. Unlabeled keys before the first header land in the
    /// empty-name section.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let eq = line
                .find('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", lineno + 1)));
            }
            cfg.set(&section, key, value);
        }
        Ok(cfg)
    }

    /// Read and parse a config file.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Assign a value (overrides any earlier assignment of the same key).
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.entries
            .push((section.to_string(), key.to_string(), value.to_string()));
    }

    /// Copy every entry of `other` on top of this config.
    pub fn overlay(&mut self, other: &Config) {
        self.entries.extend(other.entries.iter().cloned());
    }

    /// Latest value for `section.key`, if any.
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(s, k, _)| s == section && k == key)
            .map(|(_, _, v)| v.as_str())
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{section}.{key}: expected a number, got '{v}'"))),
        }
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{section}.{key}: expected a non-negative integer, got '{v}'"))),
        }
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{section}.{key}: expected a non-negative integer, got '{v}'"))),
        }
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.get(section, key) {
            None => Ok(None),
            Some("true") | Some("1") | Some("yes") => Ok(Some(true)),
            Some("false") | Some("0") | Some("no") => Ok(Some(false)),
            Some(v) => Err(Error::Config(format!("{section}.{key}: expected true/false, got '{v}'"))),
        }
    }

    /// All `(key, value)` pairs of a section after override resolution,
    /// sorted by key.
    pub fn section(&self, section: &str) -> Vec<(String, String)> {
        let mut resolved: Vec<(String, String)> = Vec::new();
        for (s, k, v) in &self.entries {
            if s != section {
                continue;
            }
            if let Some(slot) = resolved.iter_mut().find(|(key, _)| key == k) {
                slot.1 = v.clone();
            } else {
                resolved.push((k.clone(), v.clone()));
            }
        }
        resolved.sort();
        resolved
    }

    /// Sorted section names present in the config.
    pub fn section_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.entries.iter().map(|(s, _, _)| s.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Canonical text form: sections and keys sorted, overrides resolved.
    /// Two configs with the same effective contents produce identical text.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for name in self.section_names() {
            if !name.is_empty() {
                out.push_str(&format!("[{name}]\n"));
            }
            for (k, v) in self.section(&name) {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    /// FNV-1a hash of the canonical text, as fixed-width hex. Stable across
    /// runs and platforms, used to stamp output files.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in self.canonical_string().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}
