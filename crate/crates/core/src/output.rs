//! Result tables and their CSV/JSON encodings.
//!
//! CSV starts with `# schema=<name> version=1`, then a header, then rows.
//! Numbers use the shortest text that parses back to the same `f64`.

use std::fmt::Write as _;

use crate::error::{ParseError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A named, versioned table of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e15)`.
pub fn format_field(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Table {
    pub fn new(schema: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            schema: schema.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={} version={SCHEMA_VERSION}\n{}\n",
            self.schema,
            self.columns.join(",")
        );
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|&v| format_field(v)).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    fn to_value(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| json_number(v)).collect())
            .collect();
        serde_json::json!({
            "schema": self.schema,
            "version": SCHEMA_VERSION,
            "columns": self.columns,
            "rows": rows,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("tables serialize");
        s.push('\n');
        s
    }

    /// Reads the first table of [`tables_from_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        Ok(tables_from_csv(text)?.swap_remove(0))
    }
}

/// CSV sections separated by blank lines.
pub fn tables_to_csv(tables: &[Table]) -> String {
    tables
        .iter()
        .map(Table::to_csv)
        .collect::<Vec<_>>()
        .join("\n")
}

/// One table as an object, several as an array.
pub fn tables_to_json(tables: &[Table]) -> String {
    if let [one] = tables {
        return one.to_json();
    }
    let docs: Vec<serde_json::Value> = tables.iter().map(Table::to_value).collect();
    let mut s = serde_json::to_string_pretty(&docs).expect("tables serialize");
    s.push('\n');
    s
}

/// Reads every section written by [`tables_to_csv`]. A `# schema=` line after
/// data starts a new table; plain CSV with a header line is accepted too.
pub fn tables_from_csv(text: &str) -> Result<Vec<Table>> {
    let mut tables = Vec::new();
    let mut schema = String::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some(name) = meta
                .split_whitespace()
                .find_map(|w| w.strip_prefix("schema="))
            {
                if let Some(cols) = columns.take() {
                    tables.push(Table {
                        schema: std::mem::take(&mut schema),
                        columns: cols,
                        rows: std::mem::take(&mut rows),
                    });
                }
                schema = name.to_string();
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match &columns {
            None => columns = Some(fields.iter().map(|f| f.to_string()).collect()),
            Some(cols) => {
                if fields.len() != cols.len() {
                    return Err(ParseError::new(
                        n,
                        1,
                        format!("expected {} fields, found {}", cols.len(), fields.len()),
                    )
                    .into());
                }
                let mut row = Vec::with_capacity(fields.len());
                let mut col = 1;
                for f in &fields {
                    row.push(
                        f.parse::<f64>().map_err(|_| {
                            ParseError::new(n, col, format!("'{f}' is not a number"))
                        })?,
                    );
                    col += f.chars().count() + 1;
                }
                rows.push(row);
            }
        }
    }
    match columns {
        Some(columns) => tables.push(Table {
            schema,
            columns,
            rows,
        }),
        None if tables.is_empty() => {
            return Err(ParseError::new(1, 1, "missing header line").into())
        }
        None => {
            return Err(ParseError::new(
                text.lines().count(),
                1,
                format!("table '{schema}' has no header line"),
            )
            .into())
        }
    }
    Ok(tables)
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or(serde_json::Value::Null, serde_json::Value::Number)
}
