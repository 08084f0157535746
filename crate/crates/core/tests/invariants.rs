mod common;

use common::{prepared, spec_json};
use proptest::prelude::*;
use ssv_core::data::synth::Distribution;
use ssv_core::data::{ColumnDef, ColumnType, Dataset, Value};
use ssv_core::grammar::parse_spec;
use ssv_core::partition::DistOptions;
use ssv_core::pipeline::{prepare, run_layout, LayoutMode};
use ssv_core::verify::verify_layout;

fn assert_verified(p: &ssv_core::pipeline::Prepared, mode: LayoutMode) -> Vec<ssv_core::LevelLayout> {
    let out = run_layout(p, mode).unwrap();
    let report = verify_layout(&out.levels, &p.objects, &p.plan, &p.schema);
    for c in &report.checks {
        assert!(c.passed, "{mode:?} {}: {}", c.name, c.detail);
    }
    out.levels
}

#[test]
fn seq_and_dist_on_skew() {
    let p = prepared(Distribution::Skew, 10_000, 4, &spec_json(400, None, None));
    assert!(p.plan.budget_feasible);
    assert_verified(&p, LayoutMode::Sequential);
    assert_verified(&p, LayoutMode::Distributed(DistOptions { capacity: 500, workers: 4 }));
}

#[test]
fn degenerate_inputs() {
    for dist in [Distribution::Coincident, Distribution::Collinear, Distribution::Uniform] {
        let p = prepared(dist, 2000, 8, &spec_json(300, Some(0.5), None));
        let seq = assert_verified(&p, LayoutMode::Sequential);
        assert_verified(&p, LayoutMode::Distributed(DistOptions { capacity: 64, workers: 3 }));
        if dist == Distribution::Coincident {
            assert!(seq.iter().all(|l| l.clusters.len() == 1));
        }
    }
}

#[test]
fn infeasible_budget_still_non_overlapping() {
    // 240 circles fit at θ = 1 in the default viewport; K = 50 cannot be met.
    let p = prepared(Distribution::Uniform, 3000, 1, &spec_json(50, None, None));
    assert!(!p.plan.budget_feasible);
    assert_eq!(p.plan.theta, 1.0);
    assert_verified(&p, LayoutMode::Sequential);
}

#[test]
fn ascending_order_and_dimensions() {
    let mut j = spec_json(400, Some(0.7), Some(3));
    j["layout"]["z"]["order"] = "ascending".into();
    j["marks"]["cluster"]["aggregate"]["dimensions"] = serde_json::json!([{ "field": "tag" }]);
    j["data"]["columns"].as_array_mut().unwrap().push(serde_json::json!({ "name": "tag", "type": "string" }));
    let spec = parse_spec(&j.to_string()).unwrap();
    let cols = vec![
        ColumnDef::new("x", ColumnType::Float),
        ColumnDef::new("y", ColumnType::Float),
        ColumnDef::new("z", ColumnType::Float),
        ColumnDef::new("tag", ColumnType::String),
    ];
    let rows = (0..1500)
        .map(|i| {
            let f = i as f64;
            vec![
                Value::Num((f * 7.31) % 1000.0),
                Value::Num((f * 3.77) % 500.0),
                Value::Num((f * 0.618) % 1.0),
                Value::Str(["a", "b", "c"][i % 3].into()),
            ]
        })
        .collect();
    let p = prepare(&spec, &Dataset { columns: cols, rows }).unwrap();
    let levels = assert_verified(&p, LayoutMode::Sequential);
    // The top representative has the smallest z.
    let top = &p.objects[levels[0].clusters[0].rep as usize];
    let zmin = p.objects.iter().map(|o| o.payload[2].as_f64().unwrap()).fold(f64::INFINITY, f64::min);
    assert_eq!(top.payload[2].as_f64().unwrap(), zmin);
    assert_eq!(levels[0].clusters[0].agg.groups().count(), 3);
}

#[test]
fn deterministic() {
    let p = prepared(Distribution::Skew, 3000, 5, &spec_json(400, None, None));
    let mode = LayoutMode::Distributed(DistOptions { capacity: 200, workers: 4 });
    let a = run_layout(&p, mode).unwrap();
    let b = run_layout(&p, mode).unwrap();
    assert_eq!(a.levels, b.levels);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_inputs_hold_invariants(
        pts in prop::collection::vec((0u16..200, 0u16..200, 0u8..5), 1..300),
        theta in 0.2f64..1.0,
        capacity in 1u64..40,
    ) {
        let j = spec_json(1_000_000, Some(theta), Some(3));
        let spec = parse_spec(&j.to_string()).unwrap();
        let cols = vec![
            ColumnDef::new("x", ColumnType::Float),
            ColumnDef::new("y", ColumnType::Float),
            ColumnDef::new("z", ColumnType::Float),
        ];
        let rows = pts.iter().map(|&(x, y, z)| vec![Value::Num(x as f64), Value::Num(y as f64), Value::Num(z as f64)]).collect();
        let p = prepare(&spec, &Dataset { columns: cols, rows }).unwrap();
        for mode in [LayoutMode::Sequential, LayoutMode::Distributed(DistOptions { capacity, workers: 2 })] {
            let out = run_layout(&p, mode).unwrap();
            let report = verify_layout(&out.levels, &p.objects, &p.plan, &p.schema);
            for c in &report.checks {
                prop_assert!(c.passed, "{:?} {}: {}", mode, c.name, c.detail);
            }
        }
    }
}
