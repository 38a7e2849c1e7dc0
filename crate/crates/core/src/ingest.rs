//! Reading score streams.
//!
//! Two encodings carry the same records: CSV with the header
//! `id,label,confidence` (an empty `label` means none), and JSON lines with
//! keys `id`, `label` (optional or null) and `confidence`.

use std::io::{BufRead, Read};

use serde::Deserialize;

use crate::calibration::ScoreSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    /// Guess from a file name; anything but `.jsonl`/`.ndjson`/`.json` is CSV.
    pub fn from_path(path: &str) -> Self {
        let lower = path.to_ascii_lowercase();
        if lower.ends_with(".jsonl") || lower.ends_with(".ndjson") || lower.ends_with(".json") {
            Format::JsonLines
        } else {
            Format::Csv
        }
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    label: Option<String>,
    confidence: f64,
}

#[derive(Debug, Deserialize)]
struct JsonRow {
    id: serde_json::Value,
    #[serde(default)]
    label: Option<usize>,
    confidence: f64,
}

/// Streaming reader over score records.
pub struct ScoreReader<'a> {
    inner: Box<dyn Iterator<Item = Result<ScoreSample>> + 'a>,
}

impl<'a> ScoreReader<'a> {
    pub fn new<R: BufRead + 'a>(reader: R, format: Format) -> Self {
        let inner: Box<dyn Iterator<Item = Result<ScoreSample>> + 'a> = match format {
            Format::Csv => Box::new(csv_records(reader)),
            Format::JsonLines => Box::new(json_records(reader)),
        };
        Self { inner }
    }
}

impl Iterator for ScoreReader<'_> {
    type Item = Result<ScoreSample>;

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next()
    }
}

fn csv_records<R: Read>(reader: R) -> impl Iterator<Item = Result<ScoreSample>> {
    let rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.into_deserialize::<CsvRow>().enumerate().map(|(i, row)| {
        let row = row?;
        let label = match row.label.as_deref() {
            None | Some("") => None,
            Some(s) => Some(s.parse::<usize>().map_err(|_| {
                Error::parse(i + 2, format!("label {s:?} is not a non-negative integer"))
            })?),
        };
        ScoreSample::new(row.id, label, row.confidence)
    })
}

fn json_records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<ScoreSample>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(
            serde_json::from_str::<JsonRow>(&line)
                .map_err(|e| Error::parse(i + 1, e.to_string()))
                .and_then(|row| {
                    let id = match row.id {
                        serde_json::Value::String(s) => s,
                        other => other.to_string(),
                    };
                    ScoreSample::new(id, row.label, row.confidence)
                }),
        )
    })
}

pub fn read_all<R: BufRead>(reader: R, format: Format) -> Result<Vec<ScoreSample>> {
    ScoreReader::new(reader, format).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_labels() {
        let text = "id,label,confidence\na,3,0.9\nb,,0.25\n";
        let rows = read_all(text.as_bytes(), Format::Csv).unwrap();
        assert_eq!(rows[0], ScoreSample::new("a", Some(3), 0.9).unwrap());
        assert_eq!(rows[1], ScoreSample::new("b", None, 0.25).unwrap());
    }

    #[test]
    fn jsonl_records() {
        let text = "{\"id\":\"x\",\"label\":1,\"confidence\":0.5}\n\n{\"id\":7,\"label\":null,\"confidence\":1}\n{\"id\":\"z\",\"confidence\":0}\n";
        let rows = read_all(text.as_bytes(), Format::JsonLines).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].id, "7");
        assert_eq!(rows[1].label, None);
        assert_eq!(rows[2].confidence, 0.0);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(read_all("id,label,confidence\na,,1.5\n".as_bytes(), Format::Csv).is_err());
        assert!(read_all("id,label,confidence\na,-1,0.5\n".as_bytes(), Format::Csv).is_err());
        assert!(read_all("id,label,confidence\na,,x\n".as_bytes(), Format::Csv).is_err());
        let err = read_all("{\"id\":\"a\",\"confidence\":0.5}\n{oops}\n".as_bytes(), Format::JsonLines).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn format_guess() {
        assert_eq!(Format::from_path("a.jsonl"), Format::JsonLines);
        assert_eq!(Format::from_path("a.csv"), Format::Csv);
        assert_eq!(Format::from_path("-"), Format::Csv);
    }
}
