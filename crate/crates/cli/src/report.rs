//! JSON reports and CSV curves.

use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use markov_llt::report::Check;
use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use serde_json::Value;

use crate::scenario::SCHEMA_VERSION;

/// Writes every float with 17 significant digits.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt17(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{}", fmt17(value as f64))
    }
}

pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Digits17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out)?)
}

#[derive(Clone, Debug)]
pub struct Curve {
    pub name: String,
    pub x: &'static str,
    pub rows: Vec<(f64, f64, Option<f64>)>,
}

impl Curve {
    pub fn new(name: impl Into<String>, x: &'static str, rows: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Curve { name: name.into(), x, rows: rows.into_iter().map(|(a, b)| (a, b, None)).collect() }
    }

    pub fn with_se(name: impl Into<String>, x: &'static str, rows: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        Curve { name: name.into(), x, rows: rows.into_iter().map(|(a, b, c)| (a, b, Some(c))).collect() }
    }

    pub fn csv(&self) -> String {
        let se = self.rows.iter().any(|r| r.2.is_some());
        let mut s = String::from(self.x);
        s.push_str(if se { ",value,stderr\n" } else { ",value\n" });
        for (x, v, e) in &self.rows {
            s.push_str(&fmt17(*x));
            s.push(',');
            s.push_str(&fmt17(*v));
            if se {
                s.push(',');
                s.push_str(&e.map_or_else(String::new, fmt17));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(flatten)]
    pub result: serde_json::Map<String, Value>,
    #[serde(skip)]
    pub curves: Vec<Curve>,
}

impl Report {
    pub fn new(command: &'static str, result: Value, checks: Vec<Check>, curves: Vec<Curve>) -> Self {
        let result = match result {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        Report {
            schema_version: SCHEMA_VERSION,
            command,
            scenario: None,
            seed: 0,
            pass: checks.iter().all(|c| c.pass),
            checks,
            result,
            curves,
        }
    }

    pub fn write(&self, dir: &Path, csv: bool) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}.json", self.command));
        std::fs::write(&path, to_json(self)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        if csv {
            for c in &self.curves {
                let path = dir.join(format!("{}_{}.csv", self.command, c.name));
                std::fs::write(&path, c.csv()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Ok(())
    }
}
