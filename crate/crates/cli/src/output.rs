use std::io::{self, Write};

use clap::ValueEnum;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// A command result that can be printed in every output format.
pub trait Render: Serialize {
    /// Header and rows for `--format csv`.
    fn csv(&self) -> (Vec<String>, Vec<Vec<String>>);
    fn text(&self) -> String;
}

/// Writes `value` to `out`. A reader that closed the pipe early is not an error.
pub fn emit<R: Render>(format: Format, value: &R, out: &mut impl Write) -> Result<(), CliError> {
    match write_value(format, value, out) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(CliError::from),
    }
}

fn write_value<R: Render>(format: Format, value: &R, out: &mut impl Write) -> io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let (header, rows) = value.csv();
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(&header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        Format::Text => write!(out, "{}", value.text())?,
    }
    Ok(())
}

/// Six decimals, matching the benchmark tables.
pub fn fmt_bits(bits: f64) -> String {
    format!("{bits:.6}")
}

pub fn opt_bits(bits: Option<f64>) -> String {
    bits.map(fmt_bits).unwrap_or_else(|| "na".to_string())
}

/// Left-aligned columns separated by two spaces.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}
