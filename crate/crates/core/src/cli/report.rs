//! Tidy tabular output in CSV or JSON with fixed significant digits.

use std::io::Write;

use serde_json::{Map, Value};

use super::config::{OutputFormat, SCHEMA_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

/// Formats `v` with `digits` significant digits in scientific notation.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if v == 0.0 {
        // Normalizes -0.
        format!("{:.*e}", digits - 1, 0.0)
    } else {
        format!("{:.*e}", digits - 1, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(command: &str, columns: &[&'static str]) -> Self {
        Table {
            command: command.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Looks up the numeric value of the first row whose text cells match
    /// `key` column-by-column (`None` matches anything).
    pub fn find(&self, key: &[Option<&str>]) -> Option<f64> {
        self.rows.iter().find_map(|row| {
            let matches = key.iter().zip(row).all(|(k, cell)| match (k, cell) {
                (None, _) => true,
                (Some(want), Cell::Text(t)) => t == want,
                (Some(want), Cell::Int(i)) => want.parse::<u64>().ok() == Some(*i),
                (Some(_), Cell::Num(_)) => false,
            });
            if !matches {
                return None;
            }
            match row.last() {
                Some(Cell::Num(v)) => Some(*v),
                Some(Cell::Int(i)) => Some(*i as f64),
                _ => None,
            }
        })
    }

    fn render_cell(cell: &Cell, precision: usize) -> String {
        match cell {
            Cell::Text(t) => t.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => format_significant(*v, precision),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W, precision: usize) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        writer.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            writer
                .write_record(row.iter().map(|c| Self::render_cell(c, precision)))
                .map_err(csv_err)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W, precision: usize) -> Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (col, cell) in self.columns.iter().zip(row) {
                    let value = match cell {
                        Cell::Text(t) => Value::String(t.clone()),
                        Cell::Int(i) => Value::from(*i),
                        Cell::Num(v) => {
                            let text = format_significant(*v, precision);
                            match text
                                .parse::<f64>()
                                .ok()
                                .and_then(serde_json::Number::from_f64)
                            {
                                Some(n) => Value::Number(n),
                                None => Value::String(text),
                            }
                        }
                    };
                    obj.insert((*col).to_string(), value);
                }
                Value::Object(obj)
            })
            .collect();
        let mut top = Map::new();
        top.insert("columns".into(), Value::from(self.columns.clone()));
        top.insert("command".into(), Value::String(self.command.clone()));
        top.insert("rows".into(), Value::Array(rows));
        top.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        serde_json::to_writer_pretty(&mut out, &Value::Object(top))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W, format: OutputFormat, precision: usize) -> Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(out, precision),
            OutputFormat::Json => self.write_json(out, precision),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(
            format_significant(-std::f64::consts::LN_2, 12),
            "-6.93147180560e-1"
        );
        assert_eq!(format_significant(4.0 / 7.0, 12), "5.71428571429e-1");
        assert_eq!(format_significant(-0.0, 3), "0.00e0");
        assert_eq!(format_significant(f64::NEG_INFINITY, 12), "-inf");
        assert_eq!(format_significant(f64::NAN, 12), "NaN");
    }

    #[test]
    fn csv_quotes_fields_with_commas() {
        let mut t = Table::new("x", &["name", "value"]);
        t.push(vec!["a,b".into(), 1.5.into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, 3).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "name,value\r\n\"a,b\",1.50e0\r\n"
        );
    }

    #[test]
    fn json_has_stable_layout() {
        let mut t = Table::new("solve", &["quantity", "value"]);
        t.push(vec!["beta_mu".into(), (-0.5).into()]);
        t.push(vec!["mu_empty".into(), f64::NEG_INFINITY.into()]);
        let mut buf = Vec::new();
        t.write_json(&mut buf, 12).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["command"], "solve");
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["rows"][0]["value"], -0.5);
        assert_eq!(v["rows"][1]["value"], "-inf");
    }

    #[test]
    fn find_matches_text_keys() {
        let mut t = Table::new("x", &["section", "species", "quantity", "value"]);
        t.push(vec![
            "species".into(),
            "A".into(),
            "total".into(),
            1.0.into(),
        ]);
        t.push(vec![
            "species".into(),
            "B".into(),
            "total".into(),
            2.0.into(),
        ]);
        assert_eq!(
            t.find(&[Some("species"), Some("B"), Some("total")]),
            Some(2.0)
        );
        assert_eq!(t.find(&[None, Some("C")]), None);
    }
}
