//! Deterministic CSV/JSON artifact emission.
//!
//! Every artifact begins with the full resolved run configuration and the
//! library version: CSV files as `# key=value` comment lines, JSON files as
//! a leading `"config"` object (JSON admits no comments). Floats are
//! serialized with 17 significant digits, so a rerun of the identical
//! configuration reproduces the file byte for byte.

use crate::Result;
use std::fmt::Write as _;
use std::io::Write as _;

/// 17-significant-digit float serialization (lossless for f64).
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// One table cell.
#[derive(Debug, Clone)]
pub enum Value {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::F(v) => fmt_g17(*v),
            Value::I(v) => v.to_string(),
            Value::S(s) => s.clone(),
            Value::B(b) => (*b as u8).to_string(),
        }
    }

    fn json(&self) -> String {
        match self {
            Value::F(v) if v.is_nan() => "null".to_string(),
            Value::F(v) => fmt_g17(*v),
            Value::I(v) => v.to_string(),
            Value::S(s) => json_string(s),
            Value::B(b) => b.to_string(),
        }
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Output format of an artifact file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Format> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(crate::Error::Config(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Rectangular data table with an optional footer (argmax markers and the
/// like).
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub footer: Vec<(String, Value)>,
}

/// A run artifact: resolved configuration plus the table.
#[derive(Debug, Clone)]
pub struct Artifact {
    /// `(key, value)` in emission order; `command` and `version` first.
    pub config: Vec<(String, String)>,
    pub table: Table,
}

impl Artifact {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.table.columns.join(","));
        for row in &self.table.rows {
            let cells: Vec<String> = row.iter().map(Value::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        for (k, v) in &self.table.footer {
            let _ = writeln!(out, "# {k}={}", v.csv());
        }
        out
    }

    fn render_json(&self) -> String {
        let mut out = String::from("{\n  \"config\": {");
        for (i, (k, v)) in self.config.iter().enumerate() {
            let sep = if i == 0 { "" } else { "," };
            let _ = write!(out, "{sep}\n    {}: {}", json_string(k), json_string(v));
        }
        out.push_str("\n  },\n  \"columns\": [");
        for (i, c) in self.table.columns.iter().enumerate() {
            let sep = if i == 0 { "" } else { ", " };
            let _ = write!(out, "{sep}{}", json_string(c));
        }
        out.push_str("],\n  \"rows\": [");
        for (i, row) in self.table.rows.iter().enumerate() {
            let sep = if i == 0 { "" } else { "," };
            let cells: Vec<String> = row.iter().map(Value::json).collect();
            let _ = write!(out, "{sep}\n    [{}]", cells.join(", "));
        }
        out.push_str("\n  ],\n  \"footer\": {");
        for (i, (k, v)) in self.table.footer.iter().enumerate() {
            let sep = if i == 0 { "" } else { "," };
            let _ = write!(out, "{sep}\n    {}: {}", json_string(k), v.json());
        }
        out.push_str("\n  }\n}\n");
        out
    }

    /// Write to a path, or to stdout for `-`.
    pub fn write(&self, path: &str, format: Format) -> Result<()> {
        let body = self.render(format);
        if path == "-" {
            std::io::stdout().write_all(body.as_bytes())?;
        } else {
            std::fs::write(path, body)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Artifact {
        Artifact {
            config: vec![
                ("command".into(), "fisher".into()),
                ("version".into(), "0.0.0".into()),
                ("alpha".into(), fmt_g17(10.0 / std::f64::consts::PI)),
            ],
            table: Table {
                columns: vec!["x".into(), "F".into(), "ok".into()],
                rows: vec![
                    vec![Value::F(0.5), Value::F(f64::NAN), Value::B(true)],
                    vec![Value::F(-1.0), Value::F(2.0), Value::B(false)],
                ],
                footer: vec![("argmax_x".into(), Value::F(0.5))],
            },
        }
    }

    #[test]
    fn float_formatting_is_lossless() {
        for v in [
            1.0,
            -0.1,
            10.0 / std::f64::consts::PI,
            1.000181607963650,
            1e-300,
        ] {
            let s = fmt_g17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_g17(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let text = sample().render(Format::Csv);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# command=fisher");
        assert_eq!(lines.next().unwrap(), "# version=0.0.0");
        assert!(lines.next().unwrap().starts_with("# alpha=3.18309886"));
        assert_eq!(lines.next().unwrap(), "x,F,ok");
        assert!(lines.next().unwrap().ends_with(",NaN,1"));
        assert!(text.ends_with("# argmax_x=5.0000000000000000e-1\n"));
    }

    #[test]
    fn json_is_parseable_and_carries_the_config() {
        let text = sample().render(Format::Json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["config"]["command"], "fisher");
        assert!(v["config"]["alpha"]
            .as_str()
            .unwrap()
            .starts_with("3.18309886"));
        // NaN cells are null in JSON.
        assert!(v["rows"][0][1].is_null());
        assert_eq!(v["rows"][1][1].as_f64().unwrap(), 2.0);
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(sample().render(Format::Csv), sample().render(Format::Csv));
        assert_eq!(sample().render(Format::Json), sample().render(Format::Json));
    }
}
