//! Raw objects, column schemas and dataset files.

mod ingest;
pub mod synth;

pub use ingest::{
    ingest_file, read_dataset, write_dataset, DataFormat, IngestError, IngestReport, RejectedRow,
};

use serde::{Deserialize, Serialize};
use std::fmt;

/// A single cell of a data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Num(f64),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Text form used for dimension keys.
    pub fn key_string(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Num(v) => format!("{v}"),
            Value::Str(s) => s.clone(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Num(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Float,
    Int,
    String,
}

impl ColumnType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnType::Float | ColumnType::Int)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Self { name: name.into(), ty }
    }
}

/// One raw data object.
///
/// `importance` is the effective rank value: larger means more important,
/// independent of the spec's ascending/descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointObject {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub importance: f64,
    pub payload: Vec<Value>,
}

impl PointObject {
    /// Total order used everywhere objects compete for visibility:
    /// higher importance first, then smaller id.
    #[inline]
    pub fn precedes(&self, other: &PointObject) -> bool {
        importance_order(self.importance, self.id, other.importance, other.id).is_lt()
    }
}

/// Descending importance, ascending id.
#[inline]
pub fn importance_order(ia: f64, ida: u64, ib: f64, idb: u64) -> std::cmp::Ordering {
    ib.total_cmp(&ia).then(ida.cmp(&idb))
}

/// A typed table of rows as ingested.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub columns: Vec<ColumnDef>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataStats {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Dataset {
    pub fn new(columns: Vec<ColumnDef>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Min/max of the two named numeric columns. Rows with non-numeric cells
    /// are skipped.
    pub fn stats(&self, x_field: &str, y_field: &str) -> Option<DataStats> {
        let xi = self.column_index(x_field)?;
        let yi = self.column_index(y_field)?;
        let mut s = DataStats {
            n: 0,
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for row in &self.rows {
            let (Some(x), Some(y)) = (row[xi].as_f64(), row[yi].as_f64()) else {
                continue;
            };
            s.n += 1;
            s.x_min = s.x_min.min(x);
            s.x_max = s.x_max.max(x);
            s.y_min = s.y_min.min(y);
            s.y_max = s.y_max.max(y);
        }
        if s.n == 0 {
            s.x_min = 0.0;
            s.x_max = 0.0;
            s.y_min = 0.0;
            s.y_max = 0.0;
        }
        Some(s)
    }
}
