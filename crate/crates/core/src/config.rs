//! Plain-text `key=value` configuration files.
//!
//! One setting per line; blank lines and lines starting with `#` are
//! ignored. Consumers take the keys they know and then call
//! [`KvFile::finish`], which rejects anything left over so typos fail
//! loudly instead of silently falling back to defaults.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {:?}", lineno + 1, line))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("duplicate key {:?}", key)));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.entries.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key {:?}: not a number: {:?}", key, v))),
        }
    }

    pub fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.entries.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key {:?}: not an integer: {:?}", key, v))),
        }
    }

    pub fn take_u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.entries.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key {:?}: not an integer: {:?}", key, v))),
        }
    }

    /// Comma-separated list of numbers.
    pub fn take_f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("key {:?}: not a number: {:?}", key, s)))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    pub fn take_u64_list(&mut self, key: &str) -> Result<Option<Vec<u64>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("key {:?}: not an integer: {:?}", key, s)))
                })
                .collect::<Result<Vec<u64>>>()
                .map(Some),
        }
    }

    /// Inclusive `lo..hi` range; a single number collapses to a point.
    pub fn take_range(&mut self, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
        match self.entries.remove(key) {
            None => Ok(default),
            Some(v) => {
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("key {:?}: not a number: {:?}", key, s)))
                };
                if let Some((lo, hi)) = v.split_once("..") {
                    let (lo, hi) = (parse(lo)?, parse(hi)?);
                    if lo > hi {
                        return Err(Error::Config(format!("key {:?}: empty range {}..{}", key, lo, hi)));
                    }
                    Ok((lo, hi))
                } else {
                    let x = parse(&v)?;
                    Ok((x, x))
                }
            }
        }
    }

    /// Error out on any key nobody consumed.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<&str> = self.entries.keys().map(|k| k.as_str()).collect();
            Err(Error::Config(format!("unknown keys: {}", keys.join(", "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_leftovers() {
        let mut kv = KvFile::parse("# comment\na = 1\nb=2.5\n").unwrap();
        assert_eq!(kv.take_usize("a", 0).unwrap(), 1);
        assert!(kv.clone().finish().is_err());
        assert_eq!(kv.take_f64("b", 0.0).unwrap(), 2.5);
        assert!(kv.finish().is_ok());
    }

    #[test]
    fn duplicate_keys_error() {
        assert!(KvFile::parse("a=1\na=2\n").is_err());
    }

    #[test]
    fn ranges() {
        let mut kv = KvFile::parse("r=0.1..0.4\np=3\n").unwrap();
        assert_eq!(kv.take_range("r", (0.0, 0.0)).unwrap(), (0.1, 0.4));
        assert_eq!(kv.take_range("p", (0.0, 0.0)).unwrap(), (3.0, 3.0));
    }
}
