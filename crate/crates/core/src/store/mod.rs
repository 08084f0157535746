//! Per-level, per-partition cluster tables and viewport queries.

mod build;
mod query;
mod table;

pub use build::{
    build_indexes, stored_rows, BuildInput, BuildSummary, Manifest, TableEntry, DEFAULT_MERGED_LEVELS, FORMAT_VERSION,
};
pub use query::{FetchTrace, Store};
pub use table::{decode_table, encode_table, TABLE_MAGIC, TABLE_VERSION};

use crate::data::Value;
use crate::grammar::LayoutPlan;
use crate::layout::{AggState, Boundary};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("unknown level {0}")]
    UnknownLevel(u32),
    #[error("invalid viewport: {0}")]
    InvalidViewport(String),
}

impl StoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StoreError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub id: u64,
    pub importance: f64,
    pub payload: Vec<Value>,
}

/// One persisted cluster row.
///
/// `importance` is the ranking key (larger ranks first, already negated
/// for ascending order). Centroid and bbox are in the level's pixel space;
/// the boundary stays in raw data units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoredCluster {
    pub level: u32,
    pub partition: u32,
    pub rep_id: u64,
    pub importance: f64,
    pub cx: f64,
    pub cy: f64,
    pub member_count: u64,
    /// `[x_min, y_min, x_max, y_max]`
    pub bbox: [f64; 4],
    pub agg: AggState,
    pub ranklist: Vec<RankEntry>,
    pub rep_payload: Vec<Value>,
    pub boundary: Boundary,
}

impl StoredCluster {
    /// Closed-rectangle intersection with a viewport.
    #[inline]
    pub fn intersects(&self, v: &Viewport) -> bool {
        self.bbox[0] <= v.x_max && self.bbox[2] >= v.x_min && self.bbox[1] <= v.y_max && self.bbox[3] >= v.y_min
    }

    /// The boundary projected to this row's level pixel space.
    pub fn boundary_px(&self, plan: &LayoutPlan) -> Boundary {
        match &self.boundary {
            Boundary::None => Boundary::None,
            Boundary::Bbox(b) => {
                let p = plan.project(b[0], b[1], self.level);
                let q = plan.project(b[2], b[3], self.level);
                Boundary::Bbox([p[0].min(q[0]), p[1].min(q[1]), p[0].max(q[0]), p[1].max(q[1])])
            }
            Boundary::Hull(h) => Boundary::Hull(h.iter().map(|p| plan.project(p[0], p[1], self.level)).collect()),
        }
    }
}

/// A query rectangle on one level, in that level's pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Viewport {
    pub level: u32,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Viewport {
    pub fn new(level: u32, x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { level, x_min, y_min, x_max, y_max }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let c = [self.x_min, self.y_min, self.x_max, self.y_max];
        if c.iter().any(|v| v.is_nan()) {
            return Err(StoreError::InvalidViewport("coordinates must be numbers".into()));
        }
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(StoreError::InvalidViewport("min must not exceed max".into()));
        }
        Ok(())
    }
}
