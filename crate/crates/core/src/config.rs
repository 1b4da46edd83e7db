//! Plain-text `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique;
//! values run to the end of the line with surrounding whitespace trimmed.
//! Vector values are comma separated (`position = 0, 0, 2.5`).

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
}

/// Ordered key-value pairs as read from (or written to) a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut kv = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            if kv.get(key).is_some() {
                return Err(ConfigError::DuplicateKey {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
            kv.entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(kv)
    }

    /// Inserts or replaces `key`.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    pub fn parse_value<V>(&self, key: &str) -> Result<Option<V>, ConfigError>
    where
        V: FromStr,
        V::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|raw| parse_scalar(key, raw))
            .transpose()
    }

    pub fn parse_list<V>(&self, key: &str, len: usize) -> Result<Option<Vec<V>>, ConfigError>
    where
        V: FromStr,
        V::Err: std::fmt::Display,
    {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        let items = raw
            .split(',')
            .map(|item| parse_scalar(key, item.trim()))
            .collect::<Result<Vec<V>, _>>()?;
        if items.len() != len {
            return Err(ConfigError::InvalidValue {
                key: key.to_string(),
                value: raw.to_string(),
                reason: format!("expected {len} comma-separated values, got {}", items.len()),
            });
        }
        Ok(Some(items))
    }

    /// Fails on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(ConfigError::UnknownKey(k.to_string())),
            None => Ok(()),
        }
    }

    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn parse_scalar<V>(key: &str, raw: &str) -> Result<V, ConfigError>
where
    V: FromStr,
    V::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: V::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        value: raw.to_string(),
        reason: e.to_string(),
    })
}

/// Formats a list of values the way [`KeyValues::parse_list`] reads them.
pub fn format_list<V: std::fmt::Display>(values: &[V]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let kv = KeyValues::parse("# camera\nwidth = 512\n\nposition = 0, 0, 2.5\n").unwrap();
        assert_eq!(kv.parse_value::<u32>("width").unwrap(), Some(512));
        assert_eq!(
            kv.parse_list::<f64>("position", 3).unwrap(),
            Some(vec![0.0, 0.0, 2.5])
        );
        assert_eq!(kv.get("height"), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert_eq!(
            KeyValues::parse("width 512"),
            Err(ConfigError::Syntax { line: 1 })
        );
        assert!(matches!(
            KeyValues::parse("a = 1\na = 2"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
    }

    #[test]
    fn list_length_is_checked() {
        let kv = KeyValues::parse("position = 1, 2").unwrap();
        assert!(matches!(
            kv.parse_list::<f64>("position", 3),
            Err(ConfigError::InvalidValue { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let mut kv = KeyValues::new();
        kv.set("name", "linec-1");
        kv.set("speed", 1.5);
        kv.set("speed", 2);
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
        assert_eq!(kv.get("speed"), Some("2"));
    }
}
