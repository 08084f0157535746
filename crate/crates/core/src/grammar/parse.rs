use super::*;
use serde_json::{Map, Value as Json};

/// Parses and validates a JSON spec, filling config defaults.
///
/// All violations found are reported together; parsing does not stop at the
/// first failure.
pub fn parse_spec(raw: &str) -> Result<SsvSpec, SpecError> {
    let root: Json = serde_json::from_str(raw).map_err(|e| SpecError::MalformedJson(e.to_string()))?;
    let mut v = Validator::default();
    let spec = v.spec(&root);
    match spec {
        Some(s) if v.errors.is_empty() => Ok(s),
        _ => Err(SpecError::Invalid(v.errors)),
    }
}

#[derive(Default)]
struct Validator {
    errors: Vec<RuleViolation>,
    columns: Option<Vec<ColumnDef>>,
}

impl Validator {
    fn fail(&mut self, rule: u8, path: &str, message: impl Into<String>) {
        self.errors.push(RuleViolation {
            rule,
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, node: &'a Json, rule: u8, path: &str) -> Option<&'a Map<String, Json>> {
        match node.as_object() {
            Some(m) => Some(m),
            None => {
                self.fail(rule, path, "expected an object");
                None
            }
        }
    }

    fn required<'a>(
        &mut self,
        obj: &'a Map<String, Json>,
        key: &str,
        rule: u8,
        path: &str,
    ) -> Option<&'a Json> {
        match obj.get(key) {
            Some(Json::Null) | None => {
                self.fail(rule, &format!("{path}/{key}"), format!("missing required '{key}'"));
                None
            }
            Some(v) => Some(v),
        }
    }

    fn string(&mut self, node: &Json, rule: u8, path: &str) -> Option<String> {
        match node.as_str() {
            Some(s) if !s.is_empty() => Some(s.to_string()),
            _ => {
                self.fail(rule, path, "expected a non-empty string");
                None
            }
        }
    }

    fn spec(&mut self, root: &Json) -> Option<SsvSpec> {
        let obj = self.object(root, 1, "")?;
        // Data first: its column schema is needed to check field references.
        let data = self.required(obj, "data", 1, "").and_then(|d| self.data(d, "/data"));
        self.columns = data.as_ref().map(|d| d.columns.clone());
        let marks = self.required(obj, "marks", 1, "").and_then(|m| self.marks(m, "/marks"));
        let layout = self.required(obj, "layout", 1, "").and_then(|l| self.layout(l, "/layout"));
        let config = match obj.get("config") {
            None | Some(Json::Null) => Some(Config::default()),
            Some(c) => self.config(c, "/config"),
        };
        let (marks, layout, data, config) = (marks?, layout?, data?, config?);
        let spec = SsvSpec { marks, layout, data, config };
        if spec.mark_size().is_none() {
            self.fail(
                24,
                "/config",
                "custom cluster marks need explicit 'bboxW' and 'bboxH'",
            );
        }
        Some(spec)
    }

    // ---- marks ----

    fn marks(&mut self, node: &Json, path: &str) -> Option<MarksSpec> {
        let obj = self.object(node, 2, path)?;
        let cluster = self
            .required(obj, "cluster", 2, path)
            .and_then(|c| self.cluster(c, &format!("{path}/cluster")));
        let hover = match obj.get("hover") {
            None | Some(Json::Null) => Some(None),
            Some(h) => self.hover(h, &format!("{path}/hover")).map(Some),
        };
        Some(MarksSpec { cluster: cluster?, hover: hover? })
    }

    fn cluster(&mut self, node: &Json, path: &str) -> Option<ClusterSpec> {
        let obj = self.object(node, 3, path)?;
        let mode = self.required(obj, "mode", 3, path).and_then(|m| {
            let p = format!("{path}/mode");
            match m.as_str().and_then(MarkMode::parse) {
                Some(mode) => Some(mode),
                None => {
                    self.fail(5, &p, format!("mode must be one of {:?}, got {m}", MarkMode::ALL));
                    None
                }
            }
        });
        let custom = self.custom(obj, mode == Some(MarkMode::Custom), path);
        let aggregate = self
            .required(obj, "aggregate", 3, path)
            .and_then(|a| self.aggregate(a, &format!("{path}/aggregate")));
        let config = self.sub_config(obj, 3, path);
        Some(ClusterSpec {
            mode: mode?,
            custom: custom?,
            aggregate: aggregate?,
            config: config?,
        })
    }

    /// `custom` must be present (and a string) exactly when the mode is custom.
    fn custom(&mut self, obj: &Map<String, Json>, is_custom: bool, path: &str) -> Option<Option<String>> {
        let p = format!("{path}/custom");
        match (obj.get("custom"), is_custom) {
            (None | Some(Json::Null), false) => Some(None),
            (None | Some(Json::Null), true) => {
                self.fail(9, &p, "custom mode requires a renderer in 'custom'");
                None
            }
            (Some(c), true) => self.string(c, 9, &p).map(Some),
            (Some(_), false) => {
                self.fail(9, &p, "'custom' renderer given but mode is not custom");
                None
            }
        }
    }

    fn sub_config(
        &mut self,
        obj: &Map<String, Json>,
        rule: u8,
        path: &str,
    ) -> Option<BTreeMap<String, Json>> {
        match obj.get("config") {
            None | Some(Json::Null) => Some(BTreeMap::new()),
            Some(Json::Object(m)) => Some(m.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
            Some(_) => {
                self.fail(rule, &format!("{path}/config"), "config must be an object of key/value pairs");
                None
            }
        }
    }

    fn aggregate(&mut self, node: &Json, path: &str) -> Option<AggregateSpec> {
        // Shorthand: a bare list of measures.
        let (dims, measures) = match node {
            Json::Array(ms) => (None, Some(ms)),
            Json::Object(o) => {
                let dims = match o.get("dimensions") {
                    None | Some(Json::Null) => None,
                    Some(Json::Array(d)) => Some(d),
                    Some(_) => {
                        self.fail(6, &format!("{path}/dimensions"), "dimensions must be a list");
                        return None;
                    }
                };
                let ms = match o.get("measures") {
                    Some(Json::Array(m)) => Some(m),
                    None | Some(Json::Null) => None,
                    Some(_) => {
                        self.fail(6, &format!("{path}/measures"), "measures must be a list");
                        return None;
                    }
                };
                (dims, ms)
            }
            _ => {
                self.fail(6, path, "aggregate must be an object or a list of measures");
                return None;
            }
        };
        let mpath = if node.is_array() { path.to_string() } else { format!("{path}/measures") };
        let measures = match measures {
            Some(ms) if !ms.is_empty() => ms,
            _ => {
                self.fail(6, &mpath, "aggregate needs at least one measure");
                return None;
            }
        };
        let mut ok = true;
        let mut dimensions = Vec::new();
        for (i, d) in dims.into_iter().flatten().enumerate() {
            match self.dimension(d, &format!("{path}/dimensions/{i}")) {
                Some(d) => dimensions.push(d),
                None => ok = false,
            }
        }
        let mut out = Vec::new();
        for (i, m) in measures.iter().enumerate() {
            match self.measure(m, &format!("{mpath}/{i}")) {
                Some(m) => out.push(m),
                None => ok = false,
            }
        }
        ok.then_some(AggregateSpec { dimensions, measures: out })
    }

    fn dimension(&mut self, node: &Json, path: &str) -> Option<DimensionSpec> {
        let obj = self.object(node, 10, path)?;
        let field = self
            .required(obj, "field", 10, path)
            .and_then(|f| self.field(f, &format!("{path}/field"), false));
        let domain = match obj.get("domain") {
            None | Some(Json::Null) => Some(None),
            Some(Json::Array(vals)) if vals.iter().all(Json::is_string) => Some(Some(
                vals.iter().map(|v| v.as_str().unwrap().to_string()).collect(),
            )),
            Some(_) => {
                self.fail(13, &format!("{path}/domain"), "domain must be a list of strings");
                None
            }
        };
        Some(DimensionSpec { field: field?, domain: domain? })
    }

    fn measure(&mut self, node: &Json, path: &str) -> Option<MeasureSpec> {
        let obj = self.object(node, 11, path)?;
        let function = self.required(obj, "function", 11, path).and_then(|f| {
            match f.as_str().and_then(AggFunction::parse) {
                Some(func) => Some(func),
                None => {
                    self.fail(
                        14,
                        &format!("{path}/function"),
                        format!("function must be one of {:?}, got {f}", AggFunction::ALL),
                    );
                    None
                }
            }
        });
        let field = match (obj.get("field"), function) {
            (None | Some(Json::Null), Some(AggFunction::Count)) => Some(None),
            (None | Some(Json::Null), _) => {
                self.fail(11, &format!("{path}/field"), "measure needs a field");
                None
            }
            (Some(f), func) => {
                let numeric = func.is_some_and(|f| f != AggFunction::Count);
                self.field(f, &format!("{path}/field"), numeric).map(Some)
            }
        };
        let extent = match obj.get("extent") {
            None | Some(Json::Null) => Some(None),
            Some(e) => self.extent(e, &format!("{path}/extent")).map(Some),
        };
        Some(MeasureSpec { field: field?, function: function?, extent: extent? })
    }

    fn hover(&mut self, node: &Json, path: &str) -> Option<HoverSpec> {
        let obj = self.object(node, 4, path)?;
        let ranklist = self
            .required(obj, "ranklist", 4, path)
            .and_then(|r| self.ranklist(r, &format!("{path}/ranklist")));
        let boundary = self.required(obj, "boundary", 4, path).and_then(|b| match b.as_str() {
            Some("convexhull") => Some(BoundaryMode::Convexhull),
            Some("bbox") => Some(BoundaryMode::Bbox),
            _ => {
                self.fail(
                    8,
                    &format!("{path}/boundary"),
                    format!("boundary must be \"convexhull\" or \"bbox\", got {b}"),
                );
                None
            }
        });
        let config = self.sub_config(obj, 4, path);
        Some(HoverSpec { ranklist: ranklist?, boundary: boundary?, config: config? })
    }

    fn ranklist(&mut self, node: &Json, path: &str) -> Option<RanklistSpec> {
        let obj = self.object(node, 7, path)?;
        let topk = self.required(obj, "topk", 7, path).and_then(|t| match t.as_u64() {
            Some(k) if k >= 1 && k <= u32::MAX as u64 => Some(k as u32),
            _ => {
                self.fail(12, &format!("{path}/topk"), format!("topk must be a positive integer, got {t}"));
                None
            }
        });
        let mode = match obj.get("mode") {
            None | Some(Json::Null) => Some(RanklistMode::Tabular),
            Some(m) => match m.as_str() {
                Some("tabular") => Some(RanklistMode::Tabular),
                Some("custom") => Some(RanklistMode::Custom),
                _ => {
                    self.fail(7, &format!("{path}/mode"), format!("ranklist mode must be \"tabular\" or \"custom\", got {m}"));
                    None
                }
            },
        };
        let custom = self.custom(obj, mode == Some(RanklistMode::Custom), path);
        Some(RanklistSpec { topk: topk?, mode: mode?, custom: custom? })
    }

    // ---- layout ----

    fn layout(&mut self, node: &Json, path: &str) -> Option<LayoutSpec> {
        let obj = self.object(node, 15, path)?;
        let x = self.required(obj, "x", 15, path).and_then(|a| self.axis(a, 16, &format!("{path}/x")));
        let y = self.required(obj, "y", 15, path).and_then(|a| self.axis(a, 17, &format!("{path}/y")));
        let z = self.required(obj, "z", 15, path).and_then(|a| self.z(a, &format!("{path}/z")));
        let theta = match obj.get("theta") {
            None | Some(Json::Null) => Some(None),
            Some(t) => match t.as_f64() {
                Some(v) if (0.0..=1.0).contains(&v) => Some(Some(v)),
                _ => {
                    self.fail(19, &format!("{path}/theta"), format!("theta must be a number between 0 and 1, got {t}"));
                    None
                }
            },
        };
        Some(LayoutSpec { x: x?, y: y?, z: z?, theta: theta? })
    }

    fn axis(&mut self, node: &Json, rule: u8, path: &str) -> Option<AxisSpec> {
        let obj = self.object(node, rule, path)?;
        let field = self
            .required(obj, "field", rule, path)
            .and_then(|f| self.field(f, &format!("{path}/field"), true));
        let extent = match obj.get("extent") {
            None | Some(Json::Null) => Some(None),
            Some(e) => self.extent(e, &format!("{path}/extent")).map(Some),
        };
        Some(AxisSpec { field: field?, extent: extent? })
    }

    fn z(&mut self, node: &Json, path: &str) -> Option<ZSpec> {
        let obj = self.object(node, 18, path)?;
        let field = self
            .required(obj, "field", 18, path)
            .and_then(|f| self.field(f, &format!("{path}/field"), true));
        let order = self.required(obj, "order", 18, path).and_then(|o| match o.as_str() {
            Some("ascending") => Some(ImportanceOrder::Ascending),
            Some("descending") => Some(ImportanceOrder::Descending),
            _ => {
                self.fail(22, &format!("{path}/order"), format!("order must be \"ascending\" or \"descending\", got {o}"));
                None
            }
        });
        Some(ZSpec { field: field?, order: order? })
    }

    /// A column reference; checked against the data schema when it parsed.
    fn field(&mut self, node: &Json, path: &str, numeric: bool) -> Option<String> {
        let name = self.string(node, 20, path)?;
        if let Some(cols) = &self.columns {
            match cols.iter().find(|c| c.name == name) {
                None => {
                    self.fail(20, path, format!("unknown column '{name}'"));
                    return None;
                }
                Some(c) if numeric && !c.ty.is_numeric() => {
                    self.fail(20, path, format!("column '{name}' must be numeric"));
                    return None;
                }
                Some(_) => {}
            }
        }
        Some(name)
    }

    fn extent(&mut self, node: &Json, path: &str) -> Option<[f64; 2]> {
        let pair = node.as_array().filter(|a| a.len() == 2).and_then(|a| {
            let lo = a[0].as_f64()?;
            let hi = a[1].as_f64()?;
            Some([lo, hi])
        });
        match pair {
            Some([lo, hi]) if lo.is_finite() && hi.is_finite() && lo < hi => Some([lo, hi]),
            _ => {
                self.fail(21, path, format!("extent must be a pair of floats [lo, hi] with lo < hi, got {node}"));
                None
            }
        }
    }

    // ---- data & config ----

    fn data(&mut self, node: &Json, path: &str) -> Option<DataSpec> {
        let obj = self.object(node, 23, path)?;
        let source = self
            .required(obj, "source", 23, path)
            .and_then(|s| self.string(s, 23, &format!("{path}/source")));
        let format = match obj.get("format") {
            None | Some(Json::Null) => Some(
                if source.as_deref().is_some_and(|s| s.ends_with(".ndjson") || s.ends_with(".jsonl")) {
                    DataFormat::Ndjson
                } else {
                    DataFormat::Csv
                },
            ),
            Some(f) => match f.as_str() {
                Some("csv") => Some(DataFormat::Csv),
                Some("ndjson") => Some(DataFormat::Ndjson),
                _ => {
                    self.fail(23, &format!("{path}/format"), format!("format must be \"csv\" or \"ndjson\", got {f}"));
                    None
                }
            },
        };
        let columns = self.required(obj, "columns", 23, path).and_then(|c| {
            let p = format!("{path}/columns");
            let cols: Option<Vec<ColumnDef>> = serde_json::from_value(c.clone()).ok();
            match cols {
                Some(cols) if !cols.is_empty() => {
                    let mut names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
                    names.sort_unstable();
                    if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty()) {
                        self.fail(23, &p, "column names must be unique and non-empty");
                        return None;
                    }
                    Some(cols)
                }
                _ => {
                    self.fail(
                        23,
                        &p,
                        "columns must be a non-empty list of {name, type: float|int|string}",
                    );
                    None
                }
            }
        });
        Some(DataSpec { source: source?, format: format?, columns: columns? })
    }

    fn config(&mut self, node: &Json, path: &str) -> Option<Config> {
        let obj = self.object(node, 24, path)?;
        let mut cfg = Config::default();
        let mut canvas_w = None;
        let mut canvas_h = None;
        let mut ok = true;
        for (key, val) in obj {
            let p = format!("{path}/{key}");
            let pos = |v: &Json| v.as_f64().filter(|x| x.is_finite() && *x > 0.0);
            let int = |v: &Json| v.as_u64().filter(|x| *x >= 1);
            let mut bad = |me: &mut Self, what: &str| {
                me.fail(24, &p, format!("'{key}' must be {what}, got {val}"));
                ok = false;
            };
            match key.as_str() {
                "viewportWidth" => match pos(val) {
                    Some(v) => cfg.viewport_width = v,
                    None => bad(self, "a positive number"),
                },
                "viewportHeight" => match pos(val) {
                    Some(v) => cfg.viewport_height = v,
                    None => bad(self, "a positive number"),
                },
                "canvasWidth" => match pos(val) {
                    Some(v) => canvas_w = Some(v),
                    None => bad(self, "a positive number"),
                },
                "canvasHeight" => match pos(val) {
                    Some(v) => canvas_h = Some(v),
                    None => bad(self, "a positive number"),
                },
                "bboxW" => match pos(val) {
                    Some(v) => cfg.bbox_w = Some(v),
                    None => bad(self, "a positive number"),
                },
                "bboxH" => match pos(val) {
                    Some(v) => cfg.bbox_h = Some(v),
                    None => bad(self, "a positive number"),
                },
                "zoomFactor" => match pos(val).filter(|z| *z > 1.0) {
                    Some(v) => cfg.zoom_factor = v,
                    None => bad(self, "a number greater than 1"),
                },
                "numLevels" => match int(val).filter(|l| *l <= MAX_LEVELS as u64) {
                    Some(v) => cfg.num_levels = Some(v as u32),
                    None => bad(self, &format!("an integer in [1, {MAX_LEVELS}]")),
                },
                "densityBudget" => match int(val) {
                    Some(v) => cfg.density_budget = v,
                    None => bad(self, "a positive integer"),
                },
                "topLevelMergeCount" => match val.as_u64() {
                    Some(v) if v <= MAX_LEVELS as u64 => cfg.top_level_merge_count = v as u32,
                    _ => bad(self, &format!("an integer in [0, {MAX_LEVELS}]")),
                },
                "axes" => match val.as_bool() {
                    Some(v) => cfg.axes = v,
                    None => bad(self, "a boolean"),
                },
                _ => {
                    cfg.extra.insert(key.clone(), val.clone());
                }
            }
        }
        cfg.canvas_width = canvas_w.unwrap_or(cfg.viewport_width);
        cfg.canvas_height = canvas_h.unwrap_or(cfg.viewport_height);
        ok.then_some(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Json {
        json!({
            "marks": { "cluster": { "mode": "circle", "aggregate": [{ "function": "count" }] } },
            "layout": {
                "x": { "field": "x" },
                "y": { "field": "y" },
                "z": { "field": "z", "order": "descending" }
            },
            "data": {
                "source": "pts.csv",
                "columns": [
                    { "name": "x", "type": "float" },
                    { "name": "y", "type": "float" },
                    { "name": "z", "type": "float" },
                    { "name": "tag", "type": "string" }
                ]
            }
        })
    }

    fn rules(j: &Json) -> Vec<u8> {
        match parse_spec(&j.to_string()) {
            Ok(_) => vec![],
            Err(e) => e.violations().iter().map(|v| v.rule).collect(),
        }
    }

    #[test]
    fn minimal_spec_gets_defaults() {
        let s = parse_spec(&minimal().to_string()).unwrap();
        assert_eq!(s.marks.cluster.mode, MarkMode::Circle);
        assert_eq!(s.marks.cluster.aggregate.measures[0].function, AggFunction::Count);
        assert!(s.marks.cluster.aggregate.dimensions.is_empty());
        assert_eq!(s.data.format, DataFormat::Csv);
        assert_eq!(s.config, Config::default());
        assert_eq!(s.config.canvas_width, 1600.0);
        assert_eq!(s.mark_size(), Some((80.0, 80.0)));
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(parse_spec("{ nope"), Err(SpecError::MalformedJson(_))));
    }

    #[test]
    fn theta_out_of_range() {
        let mut j = minimal();
        j["layout"]["theta"] = json!(1.5);
        assert_eq!(rules(&j), vec![19]);
        j["layout"]["theta"] = json!(-0.1);
        assert_eq!(rules(&j), vec![19]);
        j["layout"]["theta"] = json!(1.0);
        assert!(rules(&j).is_empty());
    }

    #[test]
    fn each_rule_fires() {
        type Mutation = Box<dyn Fn(&mut Json)>;
        let cases: Vec<(Mutation, u8)> = vec![
            (Box::new(|j| *j = json!([1, 2])), 1),
            (Box::new(|j| { j.as_object_mut().unwrap().remove("marks"); }), 1),
            (Box::new(|j| { j["marks"].as_object_mut().unwrap().remove("cluster"); }), 2),
            (Box::new(|j| { j["marks"]["cluster"].as_object_mut().unwrap().remove("aggregate"); }), 3),
            (Box::new(|j| j["marks"]["hover"] = json!({ "ranklist": { "topk": 3 } })), 4),
            (Box::new(|j| j["marks"]["cluster"]["mode"] = json!("bar")), 5),
            (Box::new(|j| j["marks"]["cluster"]["aggregate"] = json!({ "dimensions": [], "measures": [] })), 6),
            (Box::new(|j| j["marks"]["hover"] = json!({ "ranklist": { "topk": 3, "mode": "fancy" }, "boundary": "bbox" })), 7),
            (Box::new(|j| j["marks"]["hover"] = json!({ "ranklist": { "topk": 3 }, "boundary": "circle" })), 8),
            (Box::new(|j| j["marks"]["cluster"]["mode"] = json!("custom")), 9),
            (Box::new(|j| j["marks"]["cluster"]["aggregate"] = json!({ "dimensions": [{}], "measures": [{ "function": "count" }] })), 10),
            (Box::new(|j| j["marks"]["cluster"]["aggregate"] = json!([{ "function": "sum" }])), 11),
            (Box::new(|j| j["marks"]["hover"] = json!({ "ranklist": { "topk": 0 }, "boundary": "bbox" })), 12),
            (Box::new(|j| j["marks"]["cluster"]["aggregate"] = json!({ "dimensions": [{ "field": "tag", "domain": [1, 2] }], "measures": [{ "function": "count" }] })), 13),
            (Box::new(|j| j["marks"]["cluster"]["aggregate"] = json!([{ "function": "median", "field": "z" }])), 14),
            (Box::new(|j| { j["layout"].as_object_mut().unwrap().remove("z"); }), 15),
            (Box::new(|j| j["layout"]["x"] = json!({})), 16),
            (Box::new(|j| j["layout"]["y"] = json!({ "extent": [0, 1] })), 17),
            (Box::new(|j| j["layout"]["z"] = json!({ "field": "z" })), 18),
            (Box::new(|j| j["layout"]["theta"] = json!("half")), 19),
            (Box::new(|j| j["layout"]["x"]["field"] = json!("nope")), 20),
            (Box::new(|j| j["layout"]["x"]["field"] = json!("tag")), 20),
            (Box::new(|j| j["layout"]["x"]["extent"] = json!([5, 5])), 21),
            (Box::new(|j| j["layout"]["z"]["order"] = json!("up")), 22),
            (Box::new(|j| { j["data"].as_object_mut().unwrap().remove("columns"); }), 23),
            (Box::new(|j| j["config"] = json!({ "zoomFactor": 1 })), 24),
            (Box::new(|j| j["config"] = json!("big")), 24),
        ];
        for (i, (mutate, rule)) in cases.into_iter().enumerate() {
            let mut j = minimal();
            mutate(&mut j);
            let got = rules(&j);
            assert!(got.contains(&rule), "case {i}: expected rule {rule}, got {got:?}");
        }
    }

    #[test]
    fn collects_multiple_violations() {
        let mut j = minimal();
        j["layout"]["theta"] = json!(2);
        j["marks"]["cluster"]["mode"] = json!("bar");
        let mut got = rules(&j);
        got.sort();
        assert_eq!(got, vec![5, 19]);
    }

    #[test]
    fn custom_mode_needs_bbox_unless_text() {
        let mut j = minimal();
        j["marks"]["cluster"]["mode"] = json!("custom");
        j["marks"]["cluster"]["custom"] = json!("function render(c) {}");
        assert_eq!(rules(&j), vec![24]);
        j["config"] = json!({ "bboxW": 150, "bboxH": 90 });
        assert!(rules(&j).is_empty());
        j["config"] = json!({});
        j["marks"]["cluster"]["custom"] = json!("text");
        let s = parse_spec(&j.to_string()).unwrap();
        assert_eq!(s.mark_size(), Some((200.0, 60.0)));
    }

    #[test]
    fn unknown_config_keys_are_kept() {
        let mut j = minimal();
        j["config"] = json!({ "legend": "top", "canvasWidth": 3200 });
        let s = parse_spec(&j.to_string()).unwrap();
        assert_eq!(s.config.extra["legend"], json!("top"));
        assert_eq!(s.config.canvas_width, 3200.0);
        assert_eq!(s.config.canvas_height, 900.0);
    }
}
