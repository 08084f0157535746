//! Declarative scatterplot spec: parsing, validation and compilation.
//!
//! The JSON shape mirrors the grammar's nonterminals, lowercased:
//!
//! ```json
//! {
//!   "marks": {
//!     "cluster": { "mode": "pie", "aggregate": { "dimensions": [...], "measures": [...] } },
//!     "hover": { "ranklist": { "topk": 3 }, "boundary": "convexhull" }
//!   },
//!   "layout": { "x": { "field": "price" }, "y": { "field": "qty" },
//!               "z": { "field": "date", "order": "descending" }, "theta": 0.5 },
//!   "data": { "source": "liquor.csv", "format": "csv", "columns": [...] },
//!   "config": { "densityBudget": 300 }
//! }
//! ```
//!
//! Every validation failure is reported as a [`RuleViolation`] carrying the
//! number of the grammar rule it breaks (1 through 24).

mod parse;
mod plan;

pub use parse::parse_spec;
pub use plan::{compile_plan, effective_theta, LayoutPlan, PlanError};

use crate::data::{ColumnDef, DataFormat};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const DEFAULT_VIEWPORT_WIDTH: f64 = 1600.0;
pub const DEFAULT_VIEWPORT_HEIGHT: f64 = 900.0;
pub const DEFAULT_ZOOM_FACTOR: f64 = 2.0;
pub const DEFAULT_DENSITY_BUDGET: u64 = 200;
pub const DEFAULT_TOP_LEVEL_MERGE_COUNT: u32 = 3;
pub const MAX_LEVELS: u32 = 20;

/// Name of the built-in custom renderer that draws a representative's text.
pub const TEXT_RENDERER: &str = "text";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: u8,
    /// JSON pointer to the offending node.
    pub path: String,
    pub message: String,
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} at {}: {}", self.rule, self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("{} rule violation(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<RuleViolation>),
}

impl SpecError {
    pub fn violations(&self) -> &[RuleViolation] {
        match self {
            SpecError::Invalid(v) => v,
            SpecError::MalformedJson(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsvSpec {
    pub marks: MarksSpec,
    pub layout: LayoutSpec,
    pub data: DataSpec,
    pub config: Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarksSpec {
    pub cluster: ClusterSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hover: Option<HoverSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkMode {
    Circle,
    Contour,
    Heatmap,
    Radar,
    Pie,
    Custom,
}

impl MarkMode {
    pub const ALL: [&'static str; 6] = ["circle", "contour", "heatmap", "radar", "pie", "custom"];

    pub fn as_str(self) -> &'static str {
        match self {
            MarkMode::Circle => "circle",
            MarkMode::Contour => "contour",
            MarkMode::Heatmap => "heatmap",
            MarkMode::Radar => "radar",
            MarkMode::Pie => "pie",
            MarkMode::Custom => "custom",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "circle" => MarkMode::Circle,
            "contour" => MarkMode::Contour,
            "heatmap" => MarkMode::Heatmap,
            "radar" => MarkMode::Radar,
            "pie" => MarkMode::Pie,
            "custom" => MarkMode::Custom,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub mode: MarkMode,
    /// Renderer source or built-in renderer name, only for `mode: custom`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<String>,
    pub aggregate: AggregateSpec,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub config: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSpec {
    pub dimensions: Vec<DimensionSpec>,
    pub measures: Vec<MeasureSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub field: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFunction {
    Count,
    Sum,
    Avg,
    Min,
    Max,
    Sqrsum,
}

impl AggFunction {
    pub const ALL: [&'static str; 6] = ["count", "sum", "avg", "min", "max", "sqrsum"];

    pub fn as_str(self) -> &'static str {
        match self {
            AggFunction::Count => "count",
            AggFunction::Sum => "sum",
            AggFunction::Avg => "avg",
            AggFunction::Min => "min",
            AggFunction::Max => "max",
            AggFunction::Sqrsum => "sqrsum",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "count" => AggFunction::Count,
            "sum" => AggFunction::Sum,
            "avg" => AggFunction::Avg,
            "min" => AggFunction::Min,
            "max" => AggFunction::Max,
            "sqrsum" => AggFunction::Sqrsum,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    /// Optional only for `count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub function: AggFunction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<[f64; 2]>,
}

impl MeasureSpec {
    pub fn label(&self) -> String {
        format!("{}({})", self.function.as_str(), self.field.as_deref().unwrap_or("*"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverSpec {
    pub ranklist: RanklistSpec,
    pub boundary: BoundaryMode,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub config: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RanklistMode {
    Tabular,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RanklistSpec {
    pub topk: u32,
    pub mode: RanklistMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Convexhull,
    Bbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub z: ZSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub field: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceOrder {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZSpec {
    pub field: String,
    pub order: ImportanceOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub source: String,
    pub format: DataFormat,
    pub columns: Vec<ColumnDef>,
}

/// Global key/value configuration with defaults filled in at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Config {
    pub viewport_width: f64,
    pub viewport_height: f64,
    pub canvas_width: f64,
    pub canvas_height: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_levels: Option<u32>,
    pub zoom_factor: f64,
    pub density_budget: u64,
    pub top_level_merge_count: u32,
    pub axes: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbox_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbox_h: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            viewport_width: DEFAULT_VIEWPORT_WIDTH,
            viewport_height: DEFAULT_VIEWPORT_HEIGHT,
            canvas_width: DEFAULT_VIEWPORT_WIDTH,
            canvas_height: DEFAULT_VIEWPORT_HEIGHT,
            num_levels: None,
            zoom_factor: DEFAULT_ZOOM_FACTOR,
            density_budget: DEFAULT_DENSITY_BUDGET,
            top_level_merge_count: DEFAULT_TOP_LEVEL_MERGE_COUNT,
            axes: true,
            bbox_w: None,
            bbox_h: None,
            extra: BTreeMap::new(),
        }
    }
}

impl SsvSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Default mark bounding box for the chosen mode, overridable through
    /// `config.bboxW` / `config.bboxH`.
    pub fn mark_size(&self) -> Option<(f64, f64)> {
        let c = &self.marks.cluster;
        let default = match c.mode {
            MarkMode::Circle | MarkMode::Contour | MarkMode::Heatmap => Some((80.0, 80.0)),
            MarkMode::Pie | MarkMode::Radar => Some((120.0, 120.0)),
            MarkMode::Custom if c.custom.as_deref() == Some(TEXT_RENDERER) => Some((200.0, 60.0)),
            MarkMode::Custom => None,
        };
        match (self.config.bbox_w, self.config.bbox_h, default) {
            (Some(w), Some(h), _) => Some((w, h)),
            (w, h, Some((dw, dh))) => Some((w.unwrap_or(dw), h.unwrap_or(dh))),
            _ => None,
        }
    }
}
