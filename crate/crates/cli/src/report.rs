use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::args::Format;

/// A command's output in every format, plus its exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub code: i32,
    pub human: String,
    pub structured: Value,
    /// Rows for delimiter-separated output; a flattened `structured` is
    /// used when absent.
    pub table: Option<Table>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| cells.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",");
        out.push_str(&line(&self.header));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    /// Space-aligned rendering.
    pub fn aligned(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for r in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

fn flat(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flat(&key, x, out);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let cells: Vec<String> = items.iter().map(scalar_cell).collect();
            out.push((prefix.to_string(), cells.join(" ")));
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flat(&format!("{prefix}.{i}"), x, out);
            }
        }
        other => out.push((prefix.to_string(), scalar_cell(other))),
    }
}

fn scalar_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

impl Report {
    pub fn new(code: i32, human: String, structured: Value) -> Self {
        Report {
            code,
            human,
            structured,
            table: None,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => self.human.clone(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.structured).expect("serializable report");
                s.push('\n');
                s
            }
            Format::Csv => match &self.table {
                Some(t) => t.csv(),
                None => {
                    let mut pairs = Vec::new();
                    flat("", &self.structured, &mut pairs);
                    let t = Table {
                        header: pairs.iter().map(|p| p.0.clone()).collect(),
                        rows: vec![pairs.into_iter().map(|p| p.1).collect()],
                    };
                    t.csv()
                }
            },
        }
    }
}

/// Shortest round-trip text of a value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn point_text(p: &[f64]) -> String {
    format!("({})", p.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", "))
}

pub fn point_json(p: &[f64]) -> Value {
    Value::Array(p.iter().map(|&x| Value::String(num(x))).collect())
}

/// 1-based `{1,3}` rendering.
pub fn set_text(s: &[usize]) -> String {
    robex::explain::one_based(s)
}

pub fn set_json(s: &[usize]) -> Value {
    Value::Array(s.iter().map(|&i| Value::from(i + 1)).collect())
}

/// Object builder that drops timing keys in deterministic mode.
pub struct Obj {
    map: Map<String, Value>,
    deterministic: bool,
}

impl Obj {
    pub fn new(deterministic: bool) -> Self {
        Obj {
            map: Map::new(),
            deterministic,
        }
    }

    pub fn set(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.map.insert(key.to_string(), v.into());
        self
    }

    pub fn time(self, key: &str, seconds: f64) -> Self {
        if self.deterministic {
            self
        } else {
            self.set(key, format!("{seconds:.6}"))
        }
    }

    pub fn build(self) -> Value {
        Value::Object(self.map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_flattens() {
        let r = Report::new(0, String::new(), serde_json::json!({"a": "x,y", "b": {"c": [1, 2]}}));
        assert_eq!(r.render(Format::Csv), "a,b.c\n\"x,y\",1 2\n");
    }

    #[test]
    fn aligned_table() {
        let mut t = Table::new(&["m", "name"]);
        t.rows.push(vec!["12".into(), "a".into()]);
        assert_eq!(t.aligned(), "m   name\n12  a\n");
    }
}
