//! Tabular CSV and JSON output.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which parse
//! back to the identical `f64`. A missing value is an empty CSV field and a
//! JSON `null`.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::analytic::TrajectoryPoint;
use crate::error::{Error, Result};
use crate::strobe::{CycleLedger, LimitCycleReport};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn opt_float(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn csv_field(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json_value(&self) -> String {
        match self {
            Cell::Float(x) if x.is_finite() => format_float(*x),
            Cell::Float(_) | Cell::Missing => "null".into(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => Value::String(s.clone()).to_string(),
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of one column; non-numeric cells become `None`.
    pub fn floats(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field))?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Serialization(e.to_string());
        if self.rows.is_empty() {
            return out.write_all(b"[]\n").map_err(io);
        }
        out.write_all(b"[\n").map_err(io)?;
        for (i, row) in self.rows.iter().enumerate() {
            let fields: Vec<String> = self
                .columns
                .iter()
                .zip(row)
                .map(|(k, v)| format!("{}: {}", Value::String(k.clone()), v.json_value()))
                .collect();
            let sep = if i + 1 < self.rows.len() { "," } else { "" };
            writeln!(out, "  {{{}}}{sep}", fields.join(", ")).map_err(io)?;
        }
        out.write_all(b"]\n").map_err(io)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        let mut buf = Vec::new();
        match format {
            Format::Csv => self.write_csv(&mut buf)?,
            Format::Json => self.write_json(&mut buf)?,
        }
        String::from_utf8(buf).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Parses the output of [`Table::write_json`]. Numbers written with an
    /// exponent or fraction come back as floats, bare integers as ints.
    pub fn from_json(text: &str) -> Result<Self> {
        let Value::Array(items) = serde_json::from_str(text)? else {
            return Err(Error::Serialization("expected a JSON array of rows".into()));
        };
        let mut table = Table::default();
        for (i, item) in items.into_iter().enumerate() {
            let Value::Object(map) = item else {
                return Err(Error::Serialization(format!("row {i} is not an object")));
            };
            if i == 0 {
                table.columns = map.keys().cloned().collect();
            } else if !map.keys().eq(table.columns.iter()) {
                return Err(Error::Serialization(format!("row {i} has different keys")));
            }
            let row = map
                .into_iter()
                .map(|(_, v)| match v {
                    Value::Null => Ok(Cell::Missing),
                    Value::String(s) => Ok(Cell::Text(s)),
                    Value::Number(n) => Ok(match n.as_i64() {
                        Some(k) if !n.to_string().contains(['e', 'E', '.']) => Cell::Int(k),
                        _ => Cell::Float(n.as_f64().expect("JSON numbers are finite")),
                    }),
                    other => Err(Error::Serialization(format!("unexpected value {other}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            table.rows.push(row);
        }
        Ok(table)
    }

    /// Parses CSV written by [`Table::write_csv`]; cells are typed by shape.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let columns = r.headers()?.iter().map(String::from).collect();
        let mut table = Table {
            columns,
            rows: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            table.rows.push(
                rec.iter()
                    .map(|s| {
                        if s.is_empty() {
                            Cell::Missing
                        } else if let Ok(k) = s.parse::<i64>() {
                            Cell::Int(k)
                        } else if let Ok(x) = s.parse::<f64>() {
                            Cell::Float(x)
                        } else {
                            Cell::Text(s.to_string())
                        }
                    })
                    .collect(),
            );
        }
        Ok(table)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parameter(format!(
                "unknown format {other:?} (expected csv or json)"
            ))),
        }
    }
}

/// Writes `table` to `path`, creating or truncating it.
pub fn emit(table: &Table, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let with_path = |e: Error| match e {
        Error::Serialization(msg) => Error::Serialization(format!("{}: {msg}", path.display())),
        other => other,
    };
    match format {
        Format::Csv => table.write_csv(&mut out).map_err(with_path)?,
        Format::Json => table.write_json(&mut out).map_err(with_path)?,
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub const LEDGER_COLUMNS: [&str; 11] = [
    "n",
    "Q_C",
    "Q_H",
    "W",
    "dE",
    "Sigma",
    "S",
    "Q_C_ancilla",
    "Q_H_ancilla",
    "W_onoff_C",
    "W_onoff_H",
];

impl From<&CycleLedger> for Table {
    fn from(ledger: &CycleLedger) -> Self {
        let mut t = Table::new(LEDGER_COLUMNS);
        for r in &ledger.rows {
            t.push(vec![
                Cell::Int(r.n as i64),
                Cell::Float(r.q_c),
                Cell::Float(r.q_h),
                Cell::Float(r.w),
                Cell::Float(r.de),
                Cell::Float(r.sigma),
                Cell::Float(r.entropy),
                Cell::Float(r.q_c_ancilla),
                Cell::Float(r.q_h_ancilla),
                Cell::Float(r.w_onoff_c),
                Cell::Float(r.w_onoff_h),
            ]);
        }
        t
    }
}

pub const REPORT_COLUMNS: [&str; 14] = [
    "Q_C",
    "Q_H",
    "W",
    "Sigma",
    "efficiency",
    "P",
    "regime",
    "cycles",
    "residual",
    "subleading",
    "drift",
    "Q_C_ancilla",
    "Q_H_ancilla",
    "method",
];

impl From<&LimitCycleReport> for Table {
    fn from(r: &LimitCycleReport) -> Self {
        let mut t = Table::new(REPORT_COLUMNS);
        t.push(vec![
            Cell::Float(r.q_c),
            Cell::Float(r.q_h),
            Cell::Float(r.w),
            Cell::Float(r.sigma),
            Cell::opt_float(r.efficiency),
            Cell::Float(r.power),
            Cell::Text(r.regime().to_string()),
            Cell::Int(r.cycles_to_converge as i64),
            Cell::Float(r.residual),
            Cell::opt_float(r.subleading_eigenvalue),
            Cell::Float(r.max_internal_drift()),
            Cell::Float(r.q_c_ancilla),
            Cell::Float(r.q_h_ancilla),
            Cell::Text(r.method.to_string()),
        ]);
        t
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 9] = ["n", "Z1", "Z1t", "Z2", "Z2t", "S", "St", "A", "At"];

impl From<&[TrajectoryPoint]> for Table {
    fn from(points: &[TrajectoryPoint]) -> Self {
        let mut t = Table::new(TRAJECTORY_COLUMNS);
        for p in points {
            t.push(vec![
                Cell::Int(p.n as i64),
                Cell::Float(p.x.z1),
                Cell::Float(p.x_tilde.z1),
                Cell::Float(p.x.z2),
                Cell::Float(p.x_tilde.z2),
                Cell::Float(p.x.s),
                Cell::Float(p.x_tilde.s),
                Cell::Float(p.x.a),
                Cell::Float(p.x_tilde.a),
            ]);
        }
        t
    }
}
