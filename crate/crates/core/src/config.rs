//! Run configuration: a typed key-value map resolved from defaults, an
//! optional config file (flat `key = value` text or a previous JSON
//! artifact) and command-line overrides, in that precedence order.
//! Unknown keys are rejected.

use crate::output::fmt_g17;
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::Path;

/// Key-value pairs loaded from a config file.
#[derive(Debug, Clone, Default)]
pub struct KeyValues(pub BTreeMap<String, String>);

impl KeyValues {
    /// Flat `key = value` lines; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KeyValues(map))
    }

    /// The `config` object of a previously written JSON artifact.
    pub fn from_json_artifact(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid JSON config: {e}")))?;
        let obj = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Error::Config("JSON artifact lacks a config object".into()))?;
        let mut map = BTreeMap::new();
        for (k, val) in obj {
            let s = match val {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            map.insert(k.clone(), s);
        }
        Ok(KeyValues(map))
    }

    /// Sniffs the format: a leading `{` means a JSON artifact.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            Self::from_json_artifact(&text)
        } else {
            Self::from_text(&text)
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

/// Parses alpha as a decimal, with the convenience token `<num>/pi`
/// resolved exactly (the canonical value is `10/pi`).
pub fn parse_alpha(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some(num) = s.strip_suffix("/pi") {
        num.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("invalid alpha token '{s}'")))?
            / PI
    } else {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("invalid alpha '{s}'")))?
    };
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Config(format!("alpha must be positive, got '{s}'")));
    }
    Ok(v)
}

pub fn parse_f64(s: &str, key: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("invalid number '{s}' for {key}")))
}

pub fn parse_usize(s: &str, key: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("invalid integer '{s}' for {key}")))
}

pub fn parse_u64(s: &str, key: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("invalid integer '{s}' for {key}")))
}

pub fn parse_bool(s: &str, key: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("invalid boolean '{other}' for {key}"))),
    }
}

/// Comma-separated floats.
pub fn parse_f64_list(s: &str, key: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| parse_f64(t, key))
        .collect::<Result<Vec<_>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(Error::Config(format!("{key} must not be empty")))
            } else {
                Ok(v)
            }
        })
}

/// Comma-separated alpha tokens (each may use the `/pi` form).
pub fn parse_alpha_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_alpha).collect()
}

/// Comma-separated vector of fixed length.
pub fn parse_vector(s: &str, dim: usize, key: &str) -> Result<Vec<f64>> {
    let v = parse_f64_list(s, key)?;
    if v.len() != dim {
        return Err(Error::Config(format!(
            "{key} needs {dim} components, got {}",
            v.len()
        )));
    }
    Ok(v)
}

/// Resolves parameters for one command: command-line value, else config-file
/// value, else default. Records every resolved value for the artifact header
/// and rejects unknown config-file keys at the end.
#[derive(Debug)]
pub struct Resolver<'a> {
    command: &'a str,
    file: &'a KeyValues,
    resolved: BTreeMap<String, String>,
    known: BTreeSet<String>,
}

impl<'a> Resolver<'a> {
    pub fn new(command: &'a str, file: &'a KeyValues) -> Result<Self> {
        if let Some(cmd) = file.get("command") {
            if cmd != command {
                return Err(Error::Config(format!(
                    "config file is for command '{cmd}', not '{command}'"
                )));
            }
        }
        Ok(Resolver {
            command,
            file,
            resolved: BTreeMap::new(),
            known: BTreeSet::new(),
        })
    }

    fn raw(&mut self, key: &str, cli: Option<&str>, default: &str) -> String {
        self.known.insert(key.to_string());
        let v = cli
            .map(str::to_string)
            .or_else(|| self.file.get(key).map(str::to_string))
            .unwrap_or_else(|| default.to_string());
        v
    }

    pub fn str_value(&mut self, key: &str, cli: Option<&str>, default: &str) -> String {
        let v = self.raw(key, cli, default);
        self.resolved.insert(key.to_string(), v.clone());
        v
    }

    pub fn alpha(&mut self, key: &str, cli: Option<&str>, default: &str) -> Result<f64> {
        let v = parse_alpha(&self.raw(key, cli, default))?;
        self.resolved.insert(key.to_string(), fmt_g17(v));
        Ok(v)
    }

    pub fn f64_value(&mut self, key: &str, cli: Option<&str>, default: f64) -> Result<f64> {
        let raw = self.raw(key, cli, &fmt_g17(default));
        let v = parse_f64(&raw, key)?;
        self.resolved.insert(key.to_string(), fmt_g17(v));
        Ok(v)
    }

    pub fn usize_value(&mut self, key: &str, cli: Option<&str>, default: usize) -> Result<usize> {
        let raw = self.raw(key, cli, &default.to_string());
        let v = parse_usize(&raw, key)?;
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn u64_value(&mut self, key: &str, cli: Option<&str>, default: u64) -> Result<u64> {
        let raw = self.raw(key, cli, &default.to_string());
        let v = parse_u64(&raw, key)?;
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn bool_value(&mut self, key: &str, cli: Option<&str>, default: bool) -> Result<bool> {
        let raw = self.raw(key, cli, if default { "true" } else { "false" });
        let v = parse_bool(&raw, key)?;
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn f64_list(&mut self, key: &str, cli: Option<&str>, default: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key, cli, default);
        let v = parse_f64_list(&raw, key)?;
        self.resolved.insert(
            key.to_string(),
            v.iter().map(|x| fmt_g17(*x)).collect::<Vec<_>>().join(","),
        );
        Ok(v)
    }

    pub fn alpha_list(&mut self, key: &str, cli: Option<&str>, default: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key, cli, default);
        let v = parse_alpha_list(&raw)?;
        self.resolved.insert(
            key.to_string(),
            v.iter().map(|x| fmt_g17(*x)).collect::<Vec<_>>().join(","),
        );
        Ok(v)
    }

    /// Final header rows: command and version first, then the resolved
    /// parameters in sorted order. Rejects config-file keys that the
    /// command does not define.
    pub fn finish(self, version: &str) -> Result<Vec<(String, String)>> {
        for key in self.file.0.keys() {
            if key == "command" || key == "version" || key == "format" {
                continue;
            }
            if !self.known.contains(key) {
                return Err(Error::Config(format!(
                    "unknown key '{key}' for command '{}'",
                    self.command
                )));
            }
        }
        let mut out = vec![
            ("command".to_string(), self.command.to_string()),
            ("version".to_string(), version.to_string()),
        ];
        out.extend(self.resolved);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_key_value_text() {
        let kv = KeyValues::from_text("alpha = 10/pi\n# comment\nradius=0.5 # trailing\n").unwrap();
        assert_eq!(kv.get("alpha"), Some("10/pi"));
        assert_eq!(kv.get("radius"), Some("0.5"));
        assert!(KeyValues::from_text("nonsense line").is_err());
    }

    #[test]
    fn alpha_tokens_resolve_exactly() {
        assert_eq!(parse_alpha("10/pi").unwrap(), 10.0 / PI);
        assert_eq!(parse_alpha("2/pi").unwrap(), 2.0 / PI);
        assert_eq!(parse_alpha("3.5").unwrap(), 3.5);
        assert!(parse_alpha("-1").is_err());
        assert!(parse_alpha("pi").is_err());
    }

    #[test]
    fn resolver_precedence_and_unknown_keys() {
        let file = KeyValues::from_text("radius = 0.3\nbogus = 1\n").unwrap();
        let mut r = Resolver::new("fisher", &file).unwrap();
        // CLI overrides file; file overrides default.
        assert_eq!(r.f64_value("radius", Some("0.4"), 0.1).unwrap(), 0.4);
        let err = r.finish("0.0.0").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");

        let file = KeyValues::from_text("radius = 0.3\n").unwrap();
        let mut r = Resolver::new("fisher", &file).unwrap();
        assert_eq!(r.f64_value("radius", None, 0.1).unwrap(), 0.3);
        let header = r.finish("0.0.0").unwrap();
        assert_eq!(header[0], ("command".to_string(), "fisher".to_string()));
    }

    #[test]
    fn json_artifact_round_trip_ingestion() {
        let json = r#"{"config": {"command": "fisher", "version": "0.0.0", "alpha": "3.5", "radius": "2.5000000000000000e-1"}, "columns": [], "rows": [], "footer": {}}"#;
        let kv = KeyValues::from_json_artifact(json).unwrap();
        assert_eq!(kv.get("alpha"), Some("3.5"));
        let mut r = Resolver::new("fisher", &kv).unwrap();
        assert_eq!(r.f64_value("radius", None, 0.1).unwrap(), 0.25);
        assert_eq!(r.alpha("alpha", None, "10/pi").unwrap(), 3.5);
        assert!(r.finish("0.0.0").is_ok());
        // Command mismatch is rejected.
        assert!(Resolver::new("scan2d", &kv).is_err());
    }

    #[test]
    fn vector_parsing() {
        assert_eq!(parse_vector("0.1,-0.2", 2, "y").unwrap(), vec![0.1, -0.2]);
        assert!(parse_vector("0.1", 2, "y").is_err());
        assert_eq!(parse_alpha_list("10/pi,1.5").unwrap().len(), 2);
    }
}
