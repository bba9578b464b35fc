//! Reading and writing decision streams as CSV or JSON lines.

use std::io::{BufRead, BufReader, Read, Write};

use iomon::{DecisionPoint, LabelInterner, RawValue, Schema};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "csv" => Some(Format::Csv),
            "jsonl" | "ndjson" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

/// One input row before it is typed against the schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<RawValue>,
    pub label: String,
}

#[derive(Deserialize)]
struct JsonRecord {
    features: Vec<RawValue>,
    label: serde_json::Value,
}

/// A record with the 1-based line it came from.
pub type Located = (u64, Record);

fn ingest_error(line: u64, message: impl Into<String>) -> CliError {
    CliError::Ingest {
        line,
        message: message.into(),
    }
}

/// Iterates the records of `reader` in file order. A CSV header must name
/// every schema column and the label column, in any order, and nothing else.
pub fn records<'a, R: Read + 'a>(
    reader: R,
    format: Format,
    schema: &Schema,
) -> Result<Box<dyn Iterator<Item = Result<Located>> + 'a>> {
    match format {
        Format::Csv => csv_records(reader, schema),
        Format::Jsonl => Ok(Box::new(jsonl_records(reader))),
    }
}

fn csv_records<'a, R: Read + 'a>(
    reader: R,
    schema: &Schema,
) -> Result<Box<dyn Iterator<Item = Result<Located>> + 'a>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest_error(1, format!("missing column `{name}` in header")))
    };
    let positions = schema
        .columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<usize>>>()?;
    let label_at = find(&schema.label)?;
    if let Some(extra) = header
        .iter()
        .find(|h| **h != schema.label && schema.column_index(h).is_none())
    {
        return Err(ingest_error(1, format!("unexpected column `{extra}` in header")));
    }
    let width = header.len();
    let iter = rdr.into_records().map(move |row| {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != width {
            return Err(ingest_error(
                line,
                format!("expected {width} fields, got {}", row.len()),
            ));
        }
        let features = positions
            .iter()
            .map(|&i| RawValue::Text(row[i].to_owned()))
            .collect();
        Ok((
            line,
            Record {
                features,
                label: row[label_at].to_owned(),
            },
        ))
    });
    Ok(Box::new(iter))
}

fn jsonl_records<R: Read>(reader: R) -> impl Iterator<Item = Result<Located>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line_no = i as u64 + 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            if line.trim().is_empty() {
                return None;
            }
            let parsed: JsonRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => return Some(Err(ingest_error(line_no, e.to_string()))),
            };
            let label = match parsed.label {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            Some(Ok((
                line_no,
                Record {
                    features: parsed.features,
                    label,
                },
            )))
        })
}

/// Types a record against the schema, interning its label.
pub fn to_point(
    schema: &Schema,
    labels: &mut LabelInterner,
    id: u64,
    (line, record): &Located,
) -> Result<DecisionPoint<f64>> {
    let features = schema
        .encode(&record.features)
        .map_err(|e| ingest_error(*line, e.to_string()))?;
    Ok(DecisionPoint::new(id, features, labels.intern(&record.label)))
}

/// Reads a whole stream; ids are assigned 0, 1, 2, ... in file order.
pub fn read_points<R: Read>(
    reader: R,
    format: Format,
    schema: &Schema,
    labels: &mut LabelInterner,
) -> Result<Vec<DecisionPoint<f64>>> {
    records(reader, format, schema)?
        .enumerate()
        .map(|(id, r)| to_point(schema, labels, id as u64, &r?))
        .collect()
}

/// Writes records in the given format, with a header for CSV.
pub fn write_records<W: Write>(
    out: W,
    format: Format,
    schema: &Schema,
    records: &[Record],
) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
            header.push(&schema.label);
            w.write_record(&header)?;
            for r in records {
                let mut row: Vec<String> = r.features.iter().map(raw_text).collect();
                row.push(r.label.clone());
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = std::io::BufWriter::new(out);
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn raw_text(v: &RawValue) -> String {
    match v {
        RawValue::Number(x) => x.to_string(),
        RawValue::Text(s) => s.clone(),
    }
}
