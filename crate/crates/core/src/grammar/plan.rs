use super::*;
use crate::data::{DataStats, Dataset, PointObject};
use crate::layout::{pack_bound, solve_theta};

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid density budget: {0}")]
    InvalidBudget(u64),
    #[error("mark bounding box is undefined for this mode; set config.bboxW/bboxH")]
    MissingMarkSize,
    #[error("column '{0}' not found in dataset")]
    UnknownColumn(String),
}

/// Everything the layout engine needs, with every default resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutPlan {
    pub num_levels: u32,
    pub zoom_factor: f64,
    /// Top-level canvas, px.
    pub canvas_width: f64,
    pub canvas_height: f64,
    pub viewport_width: f64,
    pub viewport_height: f64,
    /// Mark bounding box, px.
    pub mark_width: f64,
    pub mark_height: f64,
    /// Lower bound on pairwise ncd actually enforced.
    pub theta: f64,
    /// Output of the density solver alone.
    pub theta_density: f64,
    /// False when even non-overlapping marks exceed the density budget.
    pub budget_feasible: bool,
    pub density_budget: u64,
    pub top_level_merge_count: u32,
    pub order: ImportanceOrder,
    pub x_field: String,
    pub y_field: String,
    pub z_field: String,
    /// Raw-data range mapped onto the top-level canvas.
    pub x_extent: [f64; 2],
    pub y_extent: [f64; 2],
    pub dimensions: Vec<DimensionSpec>,
    pub measures: Vec<MeasureSpec>,
    pub topk: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryMode>,
    pub mark_mode: MarkMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom_renderer: Option<String>,
}

/// The larger of the overlap bound from the spec and the density bound.
pub fn effective_theta(spec_theta: Option<f64>, density_theta: f64) -> f64 {
    spec_theta.unwrap_or(0.0).max(density_theta)
}

pub fn compile_plan(spec: &SsvSpec, stats: &DataStats) -> Result<LayoutPlan, PlanError> {
    if stats.n == 0 {
        return Err(PlanError::EmptyDataset);
    }
    let cfg = &spec.config;
    let (mw, mh) = spec.mark_size().ok_or(PlanError::MissingMarkSize)?;
    let (vw, vh) = (cfg.viewport_width, cfg.viewport_height);
    let solved = solve_theta(cfg.density_budget, vw, vh, mw, mh)
        .map_err(|_| PlanError::InvalidBudget(cfg.density_budget))?;
    let theta = effective_theta(spec.layout.theta, solved.theta);

    let num_levels = cfg.num_levels.unwrap_or_else(|| {
        let per_view = pack_bound(theta, vw, vh, mw, mh).max(1) as f64;
        let need = stats.n as f64 / per_view;
        let mut eta = 1;
        while eta < MAX_LEVELS && cfg.zoom_factor.powi(2 * (eta as i32 - 1)) < need {
            eta += 1;
        }
        eta
    });

    let hover = spec.marks.hover.as_ref();
    Ok(LayoutPlan {
        num_levels,
        zoom_factor: cfg.zoom_factor,
        canvas_width: cfg.canvas_width,
        canvas_height: cfg.canvas_height,
        viewport_width: vw,
        viewport_height: vh,
        mark_width: mw,
        mark_height: mh,
        theta,
        theta_density: solved.theta,
        budget_feasible: solved.feasible,
        density_budget: cfg.density_budget,
        top_level_merge_count: cfg.top_level_merge_count,
        order: spec.layout.z.order,
        x_field: spec.layout.x.field.clone(),
        y_field: spec.layout.y.field.clone(),
        z_field: spec.layout.z.field.clone(),
        x_extent: spec.layout.x.extent.unwrap_or([stats.x_min, stats.x_max]),
        y_extent: spec.layout.y.extent.unwrap_or([stats.y_min, stats.y_max]),
        dimensions: spec.marks.cluster.aggregate.dimensions.clone(),
        measures: spec.marks.cluster.aggregate.measures.clone(),
        topk: hover.map_or(0, |h| h.ranklist.topk),
        boundary: hover.map(|h| h.boundary),
        mark_mode: spec.marks.cluster.mode,
        custom_renderer: spec.marks.cluster.custom.clone(),
    })
}

impl LayoutPlan {
    /// Pixel scale of level `level` relative to the top level.
    #[inline]
    pub fn level_scale(&self, level: u32) -> f64 {
        self.zoom_factor.powi(level as i32 - 1)
    }

    pub fn level_canvas(&self, level: u32) -> (f64, f64) {
        let s = self.level_scale(level);
        (self.canvas_width * s, self.canvas_height * s)
    }

    /// Maps a raw x value onto the top-level canvas. A degenerate extent
    /// maps everything to the canvas center.
    #[inline]
    pub fn top_px_x(&self, x: f64) -> f64 {
        let [lo, hi] = self.x_extent;
        if hi > lo {
            (x - lo) / (hi - lo) * self.canvas_width
        } else {
            self.canvas_width / 2.0
        }
    }

    /// Maps a raw y value onto the top-level canvas; larger values are
    /// higher on screen (smaller pixel y).
    #[inline]
    pub fn top_px_y(&self, y: f64) -> f64 {
        let [lo, hi] = self.y_extent;
        if hi > lo {
            (hi - y) / (hi - lo) * self.canvas_height
        } else {
            self.canvas_height / 2.0
        }
    }

    /// Raw position to level-`level` pixel space.
    #[inline]
    pub fn project(&self, x: f64, y: f64, level: u32) -> [f64; 2] {
        let s = self.level_scale(level);
        [self.top_px_x(x) * s, self.top_px_y(y) * s]
    }

    pub fn in_extent(&self, x: f64, y: f64) -> bool {
        x >= self.x_extent[0] && x <= self.x_extent[1] && y >= self.y_extent[0] && y <= self.y_extent[1]
    }

    /// Builds point objects from dataset rows. Rows with non-numeric
    /// coordinates or importance, or outside the extent, are dropped; the
    /// second value is the number dropped. Ids are row indices.
    pub fn objects(&self, ds: &Dataset) -> Result<(Vec<PointObject>, usize), PlanError> {
        let col = |name: &str| ds.column_index(name).ok_or_else(|| PlanError::UnknownColumn(name.to_string()));
        let (xi, yi, zi) = (col(&self.x_field)?, col(&self.y_field)?, col(&self.z_field)?);
        let mut out = Vec::with_capacity(ds.len());
        let mut dropped = 0;
        for (id, row) in ds.rows.iter().enumerate() {
            let parsed = (row[xi].as_f64(), row[yi].as_f64(), row[zi].as_f64());
            let (Some(x), Some(y), Some(z)) = parsed else {
                dropped += 1;
                continue;
            };
            if !z.is_finite() || !self.in_extent(x, y) {
                dropped += 1;
                continue;
            }
            let importance = match self.order {
                ImportanceOrder::Descending => z,
                ImportanceOrder::Ascending => -z,
            };
            out.push(PointObject { id: id as u64, x, y, importance, payload: row.clone() });
        }
        Ok((out, dropped))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnType, Value};
    use crate::grammar::parse_spec;
    use serde_json::json;

    fn spec(extra: serde_json::Value, theta: Option<f64>) -> SsvSpec {
        let mut j = json!({
            "marks": { "cluster": { "mode": "circle", "aggregate": [{ "function": "count" }] } },
            "layout": {
                "x": { "field": "x" }, "y": { "field": "y" },
                "z": { "field": "z", "order": "descending" }
            },
            "data": { "source": "d.csv", "columns": [
                { "name": "x", "type": "float" }, { "name": "y", "type": "float" },
                { "name": "z", "type": "float" } ] },
            "config": extra
        });
        if let Some(t) = theta {
            j["layout"]["theta"] = json!(t);
        }
        parse_spec(&j.to_string()).unwrap()
    }

    fn stats(n: usize) -> DataStats {
        DataStats { n, x_min: 0.0, x_max: 100.0, y_min: -5.0, y_max: 5.0 }
    }

    #[test]
    fn theta_is_max_of_bounds() {
        assert_eq!(effective_theta(Some(0.5), 0.3), 0.5);
        assert_eq!(effective_theta(Some(0.2), 0.4), 0.4);
        assert_eq!(effective_theta(None, 0.4), 0.4);
    }

    #[test]
    fn without_theta_uses_solver() {
        // 1000x500 viewport, 100x50 marks, K=400 -> theta 0.5.
        let s = spec(json!({ "viewportWidth": 1000, "viewportHeight": 500, "bboxW": 100, "bboxH": 50, "densityBudget": 400 }), None);
        let p = compile_plan(&s, &stats(10)).unwrap();
        let solved = solve_theta(400, 1000.0, 500.0, 100.0, 50.0).unwrap();
        assert_eq!(p.theta, solved.theta);
        assert!((p.theta - 0.5).abs() <= 1e-6);
        assert!(p.budget_feasible);
    }

    #[test]
    fn spec_theta_dominates_when_larger() {
        let cfg = json!({ "viewportWidth": 1000, "viewportHeight": 500, "bboxW": 100, "bboxH": 50, "densityBudget": 400 });
        let p = compile_plan(&spec(cfg.clone(), Some(0.9)), &stats(10)).unwrap();
        assert_eq!(p.theta, 0.9);
        let p = compile_plan(&spec(cfg, Some(0.1)), &stats(10)).unwrap();
        assert!((p.theta - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn empty_dataset() {
        assert_eq!(compile_plan(&spec(json!({}), None), &stats(0)), Err(PlanError::EmptyDataset));
    }

    #[test]
    fn extents_default_to_data() {
        let p = compile_plan(&spec(json!({}), None), &stats(10)).unwrap();
        assert_eq!(p.x_extent, [0.0, 100.0]);
        assert_eq!(p.y_extent, [-5.0, 5.0]);
        assert_eq!(p.project(0.0, 5.0, 1), [0.0, 0.0]);
        assert_eq!(p.project(100.0, -5.0, 1), [1600.0, 900.0]);
        assert_eq!(p.project(100.0, -5.0, 3), [6400.0, 3600.0]);
    }

    #[test]
    fn num_levels_default_rule() {
        // Defaults: 1600x900 viewport, 80x80 circles, K=200 is infeasible so
        // theta = 1 and 20*12 = 240 marks fit per viewport.
        let s = spec(json!({}), None);
        let p = compile_plan(&s, &stats(240)).unwrap();
        assert!(!p.budget_feasible);
        assert_eq!(p.theta, 1.0);
        assert_eq!(p.num_levels, 1);
        assert_eq!(compile_plan(&s, &stats(241)).unwrap().num_levels, 2);
        assert_eq!(compile_plan(&s, &stats(960)).unwrap().num_levels, 2);
        assert_eq!(compile_plan(&s, &stats(961)).unwrap().num_levels, 3);
        assert_eq!(compile_plan(&s, &stats(usize::MAX / 2)).unwrap().num_levels, MAX_LEVELS);
        let s = spec(json!({ "numLevels": 7 }), None);
        assert_eq!(compile_plan(&s, &stats(5)).unwrap().num_levels, 7);
    }

    #[test]
    fn deterministic() {
        let s = spec(json!({ "densityBudget": 321 }), Some(0.3));
        assert_eq!(compile_plan(&s, &stats(12345)), compile_plan(&s, &stats(12345)));
    }

    #[test]
    fn objects_drop_out_of_extent_and_apply_order() {
        let mut s = spec(json!({}), None);
        s.layout.x.extent = Some([0.0, 10.0]);
        s.layout.z.order = ImportanceOrder::Ascending;
        let p = compile_plan(&s, &stats(3)).unwrap();
        let mut ds = Dataset::new(vec![
            crate::data::ColumnDef::new("x", ColumnType::Float),
            crate::data::ColumnDef::new("y", ColumnType::Float),
            crate::data::ColumnDef::new("z", ColumnType::Float),
        ]);
        ds.rows.push(vec![Value::Num(1.0), Value::Num(0.0), Value::Num(2.0)]);
        ds.rows.push(vec![Value::Num(11.0), Value::Num(0.0), Value::Num(2.0)]);
        ds.rows.push(vec![Value::Num(5.0), Value::Null, Value::Num(2.0)]);
        let (objs, dropped) = p.objects(&ds).unwrap();
        assert_eq!(dropped, 2);
        assert_eq!(objs.len(), 1);
        assert_eq!(objs[0].importance, -2.0);
    }
}
