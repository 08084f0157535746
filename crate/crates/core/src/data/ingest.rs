use super::{ColumnDef, ColumnType, Dataset, Value};
use crate::codec::{Decoder, Encoder};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::Path;
use thiserror::Error;

const DATASET_MAGIC: &[u8; 4] = b"SSVD";
const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A row that failed type checks. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub dataset: Dataset,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Ndjson,
}

fn parse_cell(raw: &str, col: &ColumnDef) -> Result<Value, String> {
    match col.ty {
        ColumnType::String => Ok(Value::Str(raw.to_string())),
        ColumnType::Float => match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Value::Num(v)),
            _ => Err(format!("column '{}': '{}' is not a finite float", col.name, raw)),
        },
        ColumnType::Int => raw
            .trim()
            .parse::<i64>()
            .map(|v| Value::Num(v as f64))
            .map_err(|_| format!("column '{}': '{}' is not an integer", col.name, raw)),
    }
}

fn json_cell(v: Option<&serde_json::Value>, col: &ColumnDef) -> Result<Value, String> {
    let Some(v) = v else {
        return Err(format!("column '{}' missing", col.name));
    };
    match (col.ty, v) {
        (ColumnType::String, serde_json::Value::String(s)) => Ok(Value::Str(s.clone())),
        (ColumnType::String, other) => Ok(Value::Str(other.to_string())),
        (ColumnType::Float, serde_json::Value::Number(n)) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Value::Num)
            .ok_or_else(|| format!("column '{}': not a finite float", col.name)),
        (ColumnType::Int, serde_json::Value::Number(n)) if n.is_i64() => {
            Ok(Value::Num(n.as_i64().unwrap() as f64))
        }
        (_, serde_json::Value::String(s)) => parse_cell(s, col),
        _ => Err(format!("column '{}': wrong type {}", col.name, v)),
    }
}

/// Reads a CSV (with header) or newline-delimited JSON file, keeping only the
/// declared columns. Rows failing type checks are reported, not fatal.
pub fn ingest_file(
    path: &Path,
    format: DataFormat,
    columns: &[ColumnDef],
) -> Result<IngestReport, IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut dataset = Dataset::new(columns.to_vec());
    let mut rejected = Vec::new();
    match format {
        DataFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_path(path)
                .map_err(|e| match e.into_kind() {
                    csv::ErrorKind::Io(io) => io_err(io),
                    other => IngestError::Schema(format!("{other:?}")),
                })?;
            let headers = rdr.headers()?.clone();
            let mut idx = Vec::with_capacity(columns.len());
            for c in columns {
                let i = headers.iter().position(|h| h.trim() == c.name).ok_or_else(|| {
                    IngestError::Schema(format!("column '{}' not found in header", c.name))
                })?;
                idx.push(i);
            }
            for (n, rec) in rdr.records().enumerate() {
                let line = n as u64 + 2;
                let rec = match rec {
                    Ok(r) => r,
                    Err(e) => {
                        rejected.push(RejectedRow { line, reason: e.to_string() });
                        continue;
                    }
                };
                let row: Result<Vec<Value>, String> = columns
                    .iter()
                    .zip(&idx)
                    .map(|(c, &i)| match rec.get(i) {
                        Some(raw) => parse_cell(raw, c),
                        None => Err(format!("column '{}' missing", c.name)),
                    })
                    .collect();
                match row {
                    Ok(r) => dataset.rows.push(r),
                    Err(reason) => rejected.push(RejectedRow { line, reason }),
                }
            }
        }
        DataFormat::Ndjson => {
            let f = fs::File::open(path).map_err(io_err)?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line_no = n as u64 + 1;
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let obj: serde_json::Value = match serde_json::from_str(&line) {
                    Ok(v) => v,
                    Err(e) => {
                        rejected.push(RejectedRow { line: line_no, reason: e.to_string() });
                        continue;
                    }
                };
                let row: Result<Vec<Value>, String> =
                    columns.iter().map(|c| json_cell(obj.get(&c.name), c)).collect();
                match row {
                    Ok(r) => dataset.rows.push(r),
                    Err(reason) => rejected.push(RejectedRow { line: line_no, reason }),
                }
            }
        }
    }
    Ok(IngestReport { dataset, rejected })
}

/// Serializes a dataset to the binary `.ssvd` format.
pub fn write_dataset(path: &Path, ds: &Dataset) -> io::Result<()> {
    let mut enc = Encoder::new();
    enc.buf.extend_from_slice(DATASET_MAGIC);
    enc.u32(DATASET_VERSION);
    enc.u32(ds.columns.len() as u32);
    for c in &ds.columns {
        enc.str(&c.name);
        enc.u8(match c.ty {
            ColumnType::Float => 0,
            ColumnType::Int => 1,
            ColumnType::String => 2,
        });
    }
    enc.u64(ds.rows.len() as u64);
    for r in &ds.rows {
        for v in r {
            enc.value(v);
        }
    }
    fs::write(path, enc.buf)
}

pub fn read_dataset(path: &Path) -> io::Result<Dataset> {
    let buf = fs::read(path)?;
    let mut dec = Decoder::new(&buf);
    if dec.raw(4)? != DATASET_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not a dataset file"));
    }
    let version = dec.u32()?;
    if version != DATASET_VERSION {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unsupported dataset version {version}"),
        ));
    }
    let ncol = dec.u32()? as usize;
    let mut columns = Vec::with_capacity(ncol);
    for _ in 0..ncol {
        let name = dec.string()?;
        let ty = match dec.u8()? {
            0 => ColumnType::Float,
            1 => ColumnType::Int,
            2 => ColumnType::String,
            t => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("unknown column type {t}"),
                ))
            }
        };
        columns.push(ColumnDef { name, ty });
    }
    let nrows = dec.u64()? as usize;
    let mut rows = Vec::with_capacity(nrows);
    for _ in 0..nrows {
        let row = (0..ncol).map(|_| dec.value()).collect::<io::Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Dataset { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols() -> Vec<ColumnDef> {
        vec![
            ColumnDef::new("x", ColumnType::Float),
            ColumnDef::new("y", ColumnType::Float),
            ColumnDef::new("z", ColumnType::Int),
            ColumnDef::new("name", ColumnType::String),
        ]
    }

    #[test]
    fn csv_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "x,y,z,name\n1,2,3,a\n-4,5.5,6,b\n7,8,9,c\n").unwrap();
        let rep = ingest_file(&p, DataFormat::Csv, &cols()).unwrap();
        assert_eq!(rep.dataset.len(), 3);
        assert!(rep.rejected.is_empty());
        let s = rep.dataset.stats("x", "y").unwrap();
        assert_eq!((s.n, s.x_min, s.x_max, s.y_min, s.y_max), (3, -4.0, 7.0, 2.0, 8.0));
    }

    #[test]
    fn csv_bad_row_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "x,y,z,name\n1,2,3,a\nabc,5,6,b\n7,8,9,c\n").unwrap();
        let rep = ingest_file(&p, DataFormat::Csv, &cols()).unwrap();
        assert_eq!(rep.dataset.len(), 2);
        assert_eq!(rep.rejected.len(), 1);
        assert_eq!(rep.rejected[0].line, 3);
        assert!(rep.rejected[0].reason.contains("'x'"));
    }

    #[test]
    fn csv_missing_header_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "x,y\n1,2\n").unwrap();
        assert!(matches!(
            ingest_file(&p, DataFormat::Csv, &cols()),
            Err(IngestError::Schema(_))
        ));
    }

    #[test]
    fn ndjson_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ndjson");
        fs::write(
            &p,
            "{\"x\":1,\"y\":2,\"z\":3,\"name\":\"a\"}\n{\"x\":\"oops\",\"y\":2,\"z\":3,\"name\":\"b\"}\n",
        )
        .unwrap();
        let rep = ingest_file(&p, DataFormat::Ndjson, &cols()).unwrap();
        assert_eq!(rep.dataset.len(), 1);
        assert_eq!(rep.rejected[0].line, 2);
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = ingest_file(Path::new("/nonexistent/x.csv"), DataFormat::Csv, &cols());
        assert!(matches!(r, Err(IngestError::Io { .. })));
    }

    #[test]
    fn dataset_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.ssvd");
        let mut ds = Dataset::new(cols());
        ds.rows.push(vec![
            Value::Num(0.1),
            Value::Num(-2.5),
            Value::Num(3.0),
            Value::Str("héllo".into()),
        ]);
        ds.rows.push(vec![Value::Num(1e300), Value::Num(0.0), Value::Null, Value::Str(String::new())]);
        write_dataset(&p, &ds).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), ds);
    }
}
