//! Versioned JSON documents and flat CSV tables of sweep results.

use std::io::{BufRead, BufReader, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ShiftSweepReport, SweepMetric};
use crate::error::{Error, Result};

pub const DOCUMENT_FORMAT: &str = "condis-report";
pub const DOCUMENT_VERSION: u32 = 1;
pub const SWEEP_CSV_SCHEMA: &str = "condis-sweep/1";

/// A report body tagged with its kind and format version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub body: T,
}

impl<T: Serialize + DeserializeOwned> Document<T> {
    pub fn new(kind: &str, body: T) -> Self {
        Document {
            format: DOCUMENT_FORMAT.to_string(),
            version: DOCUMENT_VERSION,
            kind: kind.to_string(),
            body,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a document, rejecting other formats, versions or kinds.
    pub fn from_json(text: &str, kind: &str) -> Result<Self> {
        let head: Document<serde_json::Value> = serde_json::from_str(text)?;
        if head.format != DOCUMENT_FORMAT || head.version != DOCUMENT_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "expected {DOCUMENT_FORMAT} v{DOCUMENT_VERSION}, found {} v{}",
                head.format, head.version
            )));
        }
        if head.kind != kind {
            return Err(Error::SchemaMismatch(format!("expected a `{kind}` document, found `{}`", head.kind)));
        }
        Ok(Document {
            format: head.format,
            version: head.version,
            kind: head.kind,
            body: serde_json::from_value(head.body)?,
        })
    }
}

/// One line of a sweep CSV; `attribute` is `None` for the attribute mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub label: String,
    pub metric: SweepMetric,
    pub rho: f64,
    pub seed: u64,
    pub attribute: Option<usize>,
    pub value: f64,
}

/// Writes the schema comment line followed by one row per measurement.
pub fn write_sweep_csv(reports: &[ShiftSweepReport], out: impl Write) -> Result<()> {
    let mut out = out;
    writeln!(out, "# schema={SWEEP_CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    for report in reports {
        for row in &report.rows {
            w.serialize(SweepCsvRow {
                label: report.label.clone(),
                metric: report.metric,
                rho: row.rho,
                seed: row.seed,
                attribute: row.attribute,
                value: row.value,
            })
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::SchemaMismatch(format!("{other:?}")),
    }
}

pub fn read_sweep_csv(input: impl Read) -> Result<Vec<SweepCsvRow>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let schema = first.trim().strip_prefix("# schema=").unwrap_or("");
    if schema != SWEEP_CSV_SCHEMA {
        return Err(Error::SchemaMismatch(format!(
            "expected sweep table {SWEEP_CSV_SCHEMA}, found `{}`",
            first.trim()
        )));
    }
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{accuracy_sweep, SignReadout, ToyTask};
    use ndarray::Array2;

    fn report() -> ShiftSweepReport {
        let task = ToyTask {
            mixing: Array2::eye(2),
            sigma: 0.8,
            n: 200,
        };
        let m = [(3, SignReadout { weights: Array2::eye(2) })];
        accuracy_sweep("base", &m, &task, &[-0.8, 0.0, 0.8], 0.8).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let r = report();
        let mut buf = Vec::new();
        write_sweep_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        let rows = read_sweep_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), r.rows.len());
        for (a, b) in rows.iter().zip(&r.rows) {
            assert_eq!((a.rho, a.seed, a.attribute, a.value), (b.rho, b.seed, b.attribute, b.value));
            assert_eq!(a.label, "base");
        }
    }

    #[test]
    fn csv_rejects_unknown_schema() {
        let text = "# schema=condis-sweep/9\nlabel,metric,rho,seed,attribute,value\n";
        assert!(matches!(read_sweep_csv(text.as_bytes()), Err(Error::SchemaMismatch(_))));
        assert!(read_sweep_csv("label,rho\n".as_bytes()).is_err());
    }

    #[test]
    fn document_round_trip_and_versioning() {
        let doc = Document::new("sweep", report());
        let text = doc.to_json().unwrap();
        let back: Document<ShiftSweepReport> = Document::from_json(&text, "sweep").unwrap();
        assert_eq!(back, doc);
        assert!(Document::<ShiftSweepReport>::from_json(&text, "metrics").is_err());
        let bumped = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            Document::<ShiftSweepReport>::from_json(&bumped, "sweep"),
            Err(Error::SchemaMismatch(_))
        ));
    }
}
