//! CSV and JSON emitters with fixed column headers.

use std::io::Write;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A row type with a stable CSV header.
pub trait Table: Serialize {
    const HEADER: &'static [&'static str];
}

/// Writes the header (even for zero rows) followed by one line per row.
pub fn write_rows<R: Table, W: Write>(rows: &[R], format: Format, w: W) -> anyhow::Result<()> {
    match format {
        Format::Csv => {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            out.write_record(R::HEADER)?;
            for r in rows {
                out.serialize(r)?;
            }
            out.flush()?;
        }
        Format::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Writes a single record; JSON output is an object rather than a one-element array.
pub fn write_record<R: Table, W: Write>(row: &R, format: Format, w: W) -> anyhow::Result<()> {
    match format {
        Format::Csv => write_rows(std::slice::from_ref(row), format, w),
        Format::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, row)?;
            writeln!(w)?;
            Ok(())
        }
    }
}
