use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Failure, PipelineError, Stage};
use crate::corpus::parse_date;

/// One input row, as read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub group: String,
    #[serde(default)]
    pub date: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Json,
    Csv,
}

impl FromStr for InputFormat {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(InputFormat::Json),
            "csv" => Ok(InputFormat::Csv),
            other => Err(PipelineError::UnknownFormat(other.to_string())),
        }
    }
}

impl InputFormat {
    /// Guesses from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub records: Vec<RawRecord>,
    pub failures: Vec<Failure>,
}

impl Ingested {
    pub fn rows_read(&self) -> usize {
        self.records.len() + self.failures.len()
    }
}

fn check(record: &RawRecord) -> Result<(), String> {
    if record.id.trim().is_empty() {
        return Err("missing id".into());
    }
    if record.title.trim().is_empty() {
        return Err("missing title".into());
    }
    parse_date(&record.date).map_err(|e| e.to_string())?;
    Ok(())
}

fn failure(record: String, reason: String) -> Failure {
    Failure {
        stage: Stage::Ingest,
        record,
        reason,
    }
}

/// Reads records from a JSON array or a CSV file with header
/// `id,title,description,group,date`. Malformed rows become failures.
pub fn ingest(path: &Path, format: InputFormat) -> Result<Ingested, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if text.trim().is_empty() {
        return Ok(Ingested::default());
    }
    let rows = match format {
        InputFormat::Json => parse_json(&text, path)?,
        InputFormat::Csv => parse_csv(&text),
    };
    let mut out = Ingested::default();
    let mut seen = std::collections::HashSet::new();
    for (row, parsed) in rows.into_iter().enumerate() {
        let label = format!("row {}", row + 1);
        match parsed.and_then(|r| check(&r).map(|_| r)) {
            Ok(r) if !seen.insert(r.id.clone()) => {
                out.failures.push(failure(r.id.clone(), "duplicate id".into()))
            }
            Ok(r) => out.records.push(r),
            Err(reason) => out.failures.push(failure(label, reason)),
        }
    }
    Ok(out)
}

fn parse_json(text: &str, path: &Path) -> Result<Vec<Result<RawRecord, String>>, PipelineError> {
    let items: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| PipelineError::Malformed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    Ok(items
        .into_iter()
        .map(|v| {
            let v = normalize_json_fields(v);
            serde_json::from_value::<RawRecord>(v).map_err(|e| e.to_string())
        })
        .collect())
}

/// Accepts numbers for `id` and `date` (e.g. `"date": 2018`).
fn normalize_json_fields(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(obj) = v.as_object_mut() {
        for key in ["id", "date", "title", "description", "group"] {
            match obj.get(key) {
                Some(serde_json::Value::Number(n)) => {
                    let s = n.to_string();
                    obj.insert(key.into(), serde_json::Value::String(s));
                }
                Some(serde_json::Value::Null) => {
                    obj.remove(key);
                }
                _ => {}
            }
        }
    }
    v
}

fn parse_csv(text: &str) -> Vec<Result<RawRecord, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::Headers)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<RawRecord>()
        .map(|r| r.map_err(|e| e.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_missing_title_is_a_failure() {
        let f = file(
            "id,title,description,group,date\n\
             a,Alpha,first,g1,2019\n\
             b,,second,g1,2020\n\
             c,Gamma,\"third, with comma\",g2,2021-05-04\n",
        );
        let got = ingest(f.path(), InputFormat::Csv).unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.failures.len(), 1);
        assert_eq!(got.failures[0].record, "row 2");
        assert_eq!(got.records[1].description, "third, with comma");
        assert_eq!(got.rows_read(), 3);
    }

    #[test]
    fn empty_file_is_empty() {
        for fmt in [InputFormat::Csv, InputFormat::Json] {
            let got = ingest(file("").path(), fmt).unwrap();
            assert!(got.records.is_empty() && got.failures.is_empty());
        }
    }

    #[test]
    fn json_array() {
        let items: Vec<String> = (0..5)
            .map(|i| format!(r#"{{"id":"p{i}","title":"T{i}","description":"d","group":"g","date":"2018"}}"#))
            .collect();
        let got = ingest(file(&format!("[{}]", items.join(","))).path(), InputFormat::Json).unwrap();
        assert_eq!(got.records.len(), 5);
        assert!(got.failures.is_empty());
    }

    #[test]
    fn json_numbers_nulls_and_bad_rows() {
        let f = file(
            r#"[{"id": 7, "title": "Seven", "date": 2018, "group": null},
                {"title": "no id"},
                {"id": "x", "title": "Bad date", "date": "someday"},
                {"id": "7", "title": "dupe"}]"#,
        );
        let got = ingest(f.path(), InputFormat::Json).unwrap();
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.records[0].id, "7");
        assert_eq!(got.records[0].date, "2018");
        assert_eq!(got.failures.len(), 3);
        assert_eq!(got.failures[2].reason, "duplicate id");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            ingest(Path::new("/nonexistent/input.csv"), InputFormat::Csv),
            Err(PipelineError::Io { .. })
        ));
        assert!(matches!("xml".parse::<InputFormat>(), Err(PipelineError::UnknownFormat(_))));
        assert!(matches!(
            ingest(file("{not json").path(), InputFormat::Json),
            Err(PipelineError::Malformed { .. })
        ));
        assert_eq!(InputFormat::from_path(Path::new("a/b.CSV")), Some(InputFormat::Csv));
    }
}
