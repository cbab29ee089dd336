//! Flat `key = value` configuration files with `#` comments.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    Value { line: usize, key: String, reason: String },
}

#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl FlatConfig {
    /// Parses `text`, accepting only keys listed in `allowed`.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                reason: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    reason: "empty key".into(),
                });
            }
            if !allowed.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                });
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.into(),
                    first: *first,
                });
            }
            entries.insert(key.into(), (value.into(), line));
        }
        Ok(Self { entries })
    }

    /// Line on which `key` was set.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(_, l)| *l)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((value, line)) => value.parse().map(Some).map_err(|e: T::Err| ConfigError::Value {
                line: *line,
                key: key.into(),
                reason: e.to_string(),
            }),
        }
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((value, line)) => parse_list(value).map(Some).map_err(|reason| ConfigError::Value {
                line: *line,
                key: key.into(),
                reason,
            }),
        }
    }
}

/// Parses a comma-separated list, rejecting empty items.
pub fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|item| {
            let item = item.trim();
            if item.is_empty() {
                return Err("empty list item".to_string());
            }
            item.parse().map_err(|e: T::Err| format!("`{item}`: {e}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_lines() {
        let cfg = FlatConfig::parse("# header\n\nn = 10 # trailing\nseeds = 1, 2,3\n", &["n", "seeds"]).unwrap();
        assert_eq!(cfg.get::<usize>("n").unwrap(), Some(10));
        assert_eq!(cfg.line_of("n"), Some(3));
        assert_eq!(cfg.get_list::<u64>("seeds").unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(cfg.get::<f64>("missing").unwrap(), None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = FlatConfig::parse("n = 1\nbogus = 2\n", &["n"]).unwrap_err();
        assert_eq!(err.to_string(), "line 2: unknown key `bogus`");
        let err = FlatConfig::parse("n = 1\nn = 2\n", &["n"]).unwrap_err();
        assert!(matches!(err, ConfigError::Duplicate { line: 2, first: 1, .. }));
        let err = FlatConfig::parse("\n\nn 3\n", &["n"]).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 3, .. }));
        let cfg = FlatConfig::parse("\nn = x\n", &["n"]).unwrap();
        assert!(cfg.get::<usize>("n").unwrap_err().to_string().starts_with("line 2: invalid value for `n`"));
        let cfg = FlatConfig::parse("seeds = 1,,2\n", &["seeds"]).unwrap();
        assert!(cfg.get_list::<u64>("seeds").is_err());
    }
}
