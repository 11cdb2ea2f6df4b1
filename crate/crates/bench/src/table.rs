//! Result tables with a declared column list.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Cell written when an enumeration hit its resource guard.
pub const CENSORED: &str = "censored";
/// Cell written for the discriminability of a value with zero probability.
pub const INFINITE: &str = "inf";

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("row {row} has {found} cells, expected {expected}")]
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column:?} is empty")]
    EmptyCell { row: usize, column: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Every cell of the named column, in row order.
    pub fn values<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a str> + 'a {
        let idx = self
            .column(name)
            .unwrap_or_else(|| panic!("no column {name:?}"));
        self.rows.iter().map(move |r| r[idx].as_str())
    }

    /// Every row matches the header and no cell is empty. Censored and
    /// infinite results use the [`CENSORED`] and [`INFINITE`] markers instead.
    pub fn validate(&self) -> Result<(), TableError> {
        for (row, cells) in self.rows.iter().enumerate() {
            if cells.len() != self.columns.len() {
                return Err(TableError::Arity {
                    row,
                    expected: self.columns.len(),
                    found: cells.len(),
                });
            }
            if let Some(c) = cells.iter().position(|c| c.is_empty()) {
                return Err(TableError::EmptyCell {
                    row,
                    column: self.columns[c].clone(),
                });
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_csv())
    }

    /// Plain-text rendering with aligned columns.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&self.columns);
        for row in &self.rows {
            line(row);
        }
        out
    }
}

/// Fixed six-decimal rendering used for every float cell.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        INFINITE.to_string()
    } else {
        format!("{x:.6}")
    }
}
