//! Flat `section.key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment, blank lines are ignored.
//! Keys are dotted (`market.p`, `arm.spa.format`). Every key is checked
//! against the schema of the subcommand, so a typo is an error rather than a
//! silently ignored setting.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.field, self.reason),
            None => write!(f, "`{}`: {}", self.field, self.reason),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, (String, Option<usize>)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(Some(lineno), line, "expected `key = value`"));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || !key.contains('.') || key.split('.').any(str::is_empty) {
                return Err(err(Some(lineno), key, "keys look like `section.key`"));
            }
            if value.is_empty() {
                return Err(err(Some(lineno), key, "missing value"));
            }
            if cfg.entries.contains_key(key) {
                return Err(err(Some(lineno), key, "duplicate key"));
            }
            cfg.entries.insert(key.to_string(), (value.to_string(), Some(lineno)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(None, &path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    /// Sets a value from the command line (overrides the file).
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (value.to_string(), None));
    }

    /// Rejects keys the subcommand does not know. `patterns` may use `*` for
    /// one dotted segment (`arm.*.format`).
    pub fn check_keys(&self, patterns: &[&str]) -> Result<(), ConfigError> {
        for (key, (_, line)) in &self.entries {
            let known = patterns.iter().any(|p| matches_pattern(p, key));
            if !known {
                return Err(err(*line, key, "unknown key for this command"));
            }
        }
        Ok(())
    }

    /// Distinct names filling the `*` of `prefix.*.…` keys, sorted.
    pub fn names(&self, prefix: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .entries
            .keys()
            .filter_map(|k| {
                let rest = k.strip_prefix(prefix)?.strip_prefix('.')?;
                let (name, _) = rest.split_once('.')?;
                Some(name.to_string())
            })
            .collect();
        out.dedup();
        out
    }

    pub fn str(&self, key: &str) -> Result<&str, ConfigError> {
        self.entries
            .get(key)
            .map(|(v, _)| v.as_str())
            .ok_or_else(|| err(None, key, "missing required field"))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.entries.get(key).map(|(v, _)| v.as_str()).unwrap_or(default)
    }

    fn typed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| err(*line, key, format!("expected {what}, got `{v}`"))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let x = self.f64_opt(key)?.ok_or_else(|| err(None, key, "missing required field"))?;
        Ok(x)
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let x: Option<f64> = self.typed(key, "a number")?;
        if let Some(x) = x {
            if !x.is_finite() {
                return Err(err(self.line(key), key, "must be finite"));
            }
        }
        Ok(x)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.typed(key, "a nonnegative integer")?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.typed(key, "a nonnegative integer")?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        Ok(self.typed(key, "true or false")?.unwrap_or(default))
    }

    /// Comma-separated numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(*line, key, format!("expected comma-separated numbers, got `{v}`")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|(_, l)| *l)
    }

    pub fn error(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        err(self.line(key), key, reason)
    }

    /// One `key=value` line per entry in key order. Comments, spacing and
    /// the order of lines in the file do not survive.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .map(|(k, (v, _))| format!("{k}={v}\n"))
            .collect()
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn matches_pattern(pattern: &str, key: &str) -> bool {
    let p: Vec<&str> = pattern.split('.').collect();
    let k: Vec<&str> = key.split('.').collect();
    p.len() == k.len() && p.iter().zip(&k).all(|(a, b)| *a == "*" || a == b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_order_spacing_and_comments() {
        let a = Config::parse("market.p = 0.5\nmarket.lambda=1\n").unwrap();
        let b = Config::parse("# comment\n  market.lambda   =   1  # trailing\n\nmarket.p=0.5").unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = Config::parse("market.p = 0.6\nmarket.lambda=1\n").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn bad_number_names_line_and_field() {
        let cfg = Config::parse("market.lambda = 1\nmarket.p = half\n").unwrap();
        let e = cfg.f64("market.p").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert_eq!(e.field, "market.p");
        assert!(e.to_string().contains("line 2"));
    }

    #[test]
    fn missing_field_is_named() {
        let cfg = Config::parse("market.lambda = 1\n").unwrap();
        let e = cfg.f64("market.p").unwrap_err();
        assert_eq!(e.field, "market.p");
        assert!(e.to_string().contains("missing"));
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(Config::parse("a.b = 1\nnot a pair\n").unwrap_err().line, Some(2));
        assert!(Config::parse("nodot = 1").is_err());
        assert!(Config::parse("a.b = 1\na.b = 2").is_err());
        assert!(Config::parse("a.b =").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let cfg = Config::parse("market.p = 1\narm.x.format = first\narm.x.colour = red\n").unwrap();
        let e = cfg.check_keys(&["market.p", "arm.*.format"]).unwrap_err();
        assert_eq!(e.field, "arm.x.colour");
        assert_eq!(e.line, Some(3));
        assert!(cfg.check_keys(&["market.p", "arm.*.format", "arm.*.colour"]).is_ok());
    }

    #[test]
    fn arm_names_sorted_and_distinct() {
        let cfg = Config::parse("arm.spa.format = second\narm.fpa.format = first\narm.spa.bidding = truthful\n").unwrap();
        assert_eq!(cfg.names("arm"), vec!["fpa", "spa"]);
    }

    #[test]
    fn lists() {
        let cfg = Config::parse("r.grid = 0.1, 0.03,0.01\nbad.list = 1,x").unwrap();
        assert_eq!(cfg.f64_list("r.grid").unwrap(), Some(vec![0.1, 0.03, 0.01]));
        assert!(cfg.f64_list("bad.list").is_err());
    }
}
